#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "harmonic/models.hpp"

namespace harmonic {

namespace {

using nlohmann::json;

ParamRole parse_role(const std::string& name) {
  for (ParamRole r : {ParamRole::embedding, ParamRole::weight, ParamRole::bias, ParamRole::head}) {
    if (role_name(r) == name) return r;
  }
  throw FormatError("checkpoint: unknown parameter role '" + name + "'");
}

void write_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_le(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw FormatError("checkpoint: truncated parameter data");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  const ModelSpec& s = model.spec;
  json manifest;
  manifest["format"] = "harmonic-checkpoint-v1";
  manifest["spec"] = {{"body", s.body == BodyKind::token_mlp ? "token_mlp" : "identity"},
                      {"vocab_in", s.vocab_in},
                      {"tokens_per_input", s.tokens_per_input},
                      {"embed_dim", s.embed_dim},
                      {"hidden", s.hidden},
                      {"input_dim", s.input_dim},
                      {"penultimate", s.penultimate},
                      {"classes", s.classes},
                      {"embed_std", s.embed_std},
                      {"head_std", s.head_std}};
  manifest["params"] = json::array();
  for (const Parameter& p : model.params) {
    manifest["params"].push_back(
        {{"name", p.name}, {"role", role_name(p.role)}, {"shape", p.value.shape()}});
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write checkpoint " + path);
  out << manifest.dump() << '\n';
  for (const Parameter& p : model.params) {
    for (double v : p.value.data()) write_le(out, v);
  }
  if (!out) throw FileError("failed writing checkpoint " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open checkpoint " + path);
  std::string header;
  if (!std::getline(in, header)) throw FormatError("checkpoint: missing manifest");
  json manifest;
  try {
    manifest = json::parse(header);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "harmonic-checkpoint-v1") {
    throw FormatError("checkpoint: unsupported format");
  }

  Model m;
  try {
    const json& s = manifest.at("spec");
    m.spec.body = s.at("body") == "token_mlp" ? BodyKind::token_mlp : BodyKind::identity;
    m.spec.vocab_in = s.at("vocab_in");
    m.spec.tokens_per_input = s.at("tokens_per_input");
    m.spec.embed_dim = s.at("embed_dim");
    m.spec.hidden = s.at("hidden");
    m.spec.input_dim = s.at("input_dim");
    m.spec.penultimate = s.at("penultimate");
    m.spec.classes = s.at("classes");
    m.spec.embed_std = s.value("embed_std", 1.0);
    m.spec.head_std = s.value("head_std", 0.0);
    for (const json& p : manifest.at("params")) {
      Tensor t(p.at("shape").get<Shape>());
      for (double& v : t.data()) v = read_le(in);
      m.params.push_back({p.at("name"), parse_role(p.at("role")), std::move(t)});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad manifest: ") + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("checkpoint: trailing bytes after parameter data");
  }
  return m;
}

}  // namespace harmonic
