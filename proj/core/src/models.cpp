#include "harmonic/models.hpp"

#include <algorithm>
#include <cmath>

#include "harmonic/random.hpp"

namespace harmonic {

namespace {

constexpr std::size_t kImagePixels = 784;
constexpr std::size_t kDigitClasses = 10;

Tensor normal_tensor(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Tensor t({rows, cols});
  for (double& v : t.data()) v = stddev * rng.normal();
  return t;
}

Tensor head_tensor(Rng& rng, const ModelSpec& spec) {
  const std::size_t dim = spec.head_dim();
  const double std =
      spec.head_std > 0.0 ? spec.head_std : 1.0 / std::sqrt(static_cast<double>(dim));
  return normal_tensor(rng, dim, spec.classes, std);
}

}  // namespace

std::size_t ModelSpec::head_dim() const {
  return body == BodyKind::token_mlp ? penultimate : input_dim;
}

ModelSpec mlp_spec(std::size_t vocab_in, std::size_t vocab_out, std::size_t tokens_per_input) {
  ModelSpec s;
  s.body = BodyKind::token_mlp;
  s.vocab_in = vocab_in;
  s.tokens_per_input = tokens_per_input;
  s.classes = vocab_out;
  s.head_std = 1.0;
  return s;
}

ModelSpec image_spec() {
  ModelSpec s;
  s.body = BodyKind::identity;
  s.input_dim = kImagePixels;
  s.classes = kDigitClasses;
  return s;
}

ModelSpec toy_spec(std::size_t classes) {
  ModelSpec s;
  s.body = BodyKind::identity;
  s.input_dim = 2;
  s.classes = classes;
  return s;
}

const Tensor& Model::head() const { return params.back().value; }
Tensor& Model::head() { return params.back().value; }

const Tensor& Model::embedding() const {
  if (spec.body != BodyKind::token_mlp) throw ContractError("model has no token embedding");
  return params.front().value;
}

double Model::squared_norm() const {
  double s = 0.0;
  for (const Parameter& p : params) s += p.value.squared_norm();
  return s;
}

Model init_params(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.classes == 0) throw ContractError("model needs at least one class");
  if (!(spec.embed_std > 0.0) || !(spec.head_std >= 0.0)) {
    throw ContractError("init scales must be positive");
  }
  Rng rng(seed);
  Model m{spec, {}};
  if (spec.body == BodyKind::token_mlp) {
    if (spec.vocab_in == 0 || spec.tokens_per_input == 0) {
      throw ContractError("token MLP needs a vocabulary and tokens per input");
    }
    const std::size_t concat = spec.embed_dim * spec.tokens_per_input;
    const auto inv_sqrt = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };
    m.params.push_back({"embedding", ParamRole::embedding,
                        normal_tensor(rng, spec.vocab_in, spec.embed_dim, spec.embed_std)});
    m.params.push_back({"w1", ParamRole::weight,
                        normal_tensor(rng, concat, spec.hidden, inv_sqrt(concat))});
    m.params.push_back({"b1", ParamRole::bias, Tensor::zeros(1, spec.hidden)});
    m.params.push_back({"w2", ParamRole::weight,
                        normal_tensor(rng, spec.hidden, spec.penultimate, inv_sqrt(spec.hidden))});
    m.params.push_back({"b2", ParamRole::bias, Tensor::zeros(1, spec.penultimate)});
  } else if (spec.input_dim == 0) {
    throw ContractError("identity body needs an input dimension");
  }
  m.params.push_back({"head", ParamRole::head, head_tensor(rng, spec)});
  return m;
}

std::size_t batch_count(const InputBatch& inputs) {
  if (const auto* t = std::get_if<TokenBatch>(&inputs)) return t->count();
  return std::get<Tensor>(inputs).rows();
}

Var forward_body(Graph& graph, const Model& model, std::span<const Var> params,
                 const InputBatch& inputs) {
  if (params.size() != model.params.size()) {
    throw ContractError("forward_body: parameter count mismatch");
  }
  const ModelSpec& spec = model.spec;
  if (spec.body == BodyKind::identity) {
    const auto* features = std::get_if<Tensor>(&inputs);
    if (!features) throw ContractError("identity body expects dense features");
    require_matrix(*features, "features");
    if (features->cols() != spec.input_dim) {
      throw DimensionError("expected " + std::to_string(spec.input_dim) + " features, got " +
                           std::to_string(features->cols()));
    }
    return graph.constant(*features);
  }

  const auto* tokens = std::get_if<TokenBatch>(&inputs);
  if (!tokens) throw ContractError("token MLP expects token inputs");
  const std::size_t width = spec.tokens_per_input;
  if (tokens->width != width || tokens->ids.size() % width != 0) {
    throw DimensionError("expected " + std::to_string(width) + " tokens per input");
  }
  const std::size_t count = tokens->count();
  std::vector<Var> parts;
  std::vector<std::size_t> column(count);
  for (std::size_t t = 0; t < width; ++t) {
    for (std::size_t b = 0; b < count; ++b) column[b] = tokens->ids[b * width + t];
    parts.push_back(graph.gather_rows(params[0], column));
  }
  const Var joined = width == 1 ? parts[0] : graph.concat(parts);
  const Var hidden = graph.silu(graph.add(graph.matmul(joined, params[1]), params[2]));
  return graph.add(graph.matmul(hidden, params[3]), params[4]);
}

Tensor penultimate(const Model& model, const InputBatch& inputs) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(model.params.size());
  for (const Parameter& p : model.params) vars.push_back(g.constant(p.value));
  return g.value(forward_body(g, model, vars, inputs));
}

Tensor mlp_forward(const Model& model, std::span<const std::size_t> tokens) {
  if (model.spec.body != BodyKind::token_mlp) throw ContractError("mlp_forward on a non-MLP model");
  TokenBatch batch{tokens.size(), std::vector<std::size_t>(tokens.begin(), tokens.end())};
  return penultimate(model, batch);
}

Tensor image_forward(std::span<const double> image) {
  if (image.size() != kImagePixels) {
    throw DimensionError("image must have 784 pixels, got " + std::to_string(image.size()));
  }
  for (double v : image) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("pixel values must lie in [0, 1]");
  }
  return Tensor::row(image);
}

std::vector<std::size_t> predict_from_scores(const Tensor& scores, const HeadKind& head) {
  const bool nearest = is_harmonic(head);
  std::vector<std::size_t> out(scores.rows());
  for (std::size_t b = 0; b < scores.rows(); ++b) {
    const auto row = scores.row_span(b);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k) {
      if (nearest ? row[k] < row[best] : row[k] > row[best]) best = k;
    }
    out[b] = best;
  }
  return out;
}

std::size_t predict(std::span<const double> x, const Tensor& head_weights, const HeadKind& head) {
  return predict_from_scores(head_scores(Tensor::row(x), head_weights, head), head).front();
}

std::string role_name(ParamRole role) {
  switch (role) {
    case ParamRole::embedding: return "embedding";
    case ParamRole::weight: return "weight";
    case ParamRole::bias: return "bias";
    case ParamRole::head: return "head";
  }
  return "unknown";
}

}  // namespace harmonic
