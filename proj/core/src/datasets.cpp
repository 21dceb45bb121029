#include "harmonic/datasets.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "harmonic/groups.hpp"
#include "harmonic/random.hpp"

namespace harmonic {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(path + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

std::vector<unsigned char> read_bytes(std::istream& in, std::size_t n, const std::string& path) {
  std::vector<unsigned char> out(n);
  if (!in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(n))) {
    throw FormatError(path + ": truncated IDX payload");
  }
  return out;
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path);
  return in;
}

}  // namespace

TokenDataset gen_modular_addition(std::size_t modulus) {
  if (modulus == 0) throw ContractError("modulus must be positive");
  TokenDataset d{"modadd", modulus, modulus, 2, {}, "target = (x + y) mod p"};
  for (std::size_t x = 0; x < modulus; ++x) {
    for (std::size_t y = 0; y < modulus; ++y) d.samples.push_back({{x, y}, (x + y) % modulus});
  }
  return d;
}

TokenDataset gen_equivalence(std::size_t range, std::size_t modulus) {
  if (modulus == 0 || range == 0) throw ContractError("range and modulus must be positive");
  TokenDataset d{"equiv", range, 2, 2, {}, "target = 1 iff x = y (mod m)"};
  for (std::size_t x = 0; x < range; ++x) {
    for (std::size_t y = 0; y < range; ++y) {
      d.samples.push_back({{x, y}, x % modulus == y % modulus ? 1u : 0u});
    }
  }
  return d;
}

TokenDataset gen_genealogy(std::size_t nodes) {
  if (nodes == 0) throw ContractError("tree needs at least one node");
  TokenDataset d{"genealogy", nodes + 3, nodes, 2, {},
                 "heap-indexed nodes; parent=i/2, grandparent=i/4, sibling=i^1"};
  const auto relation_token = [nodes](Relation r) { return nodes + static_cast<std::size_t>(r); };
  for (Relation r : {Relation::parent, Relation::grandparent, Relation::sibling}) {
    for (std::size_t i = 1; i <= nodes; ++i) {
      std::size_t object = 0;
      switch (r) {
        case Relation::parent: object = i / 2; break;
        case Relation::grandparent: object = i / 4; break;
        case Relation::sibling: object = i ^ 1u; break;
      }
      if (object < 1 || object > nodes || object == i) continue;
      d.samples.push_back({{i - 1, relation_token(r)}, object - 1});
    }
  }
  return d;
}

std::size_t lattice_token(std::size_t size, std::size_t row, std::size_t col) {
  return size * row + col;
}

TokenDataset gen_lattice_icl(std::size_t size) {
  if (size == 0) throw ContractError("lattice size must be positive");
  const std::size_t points = size * size;
  TokenDataset d{"icl", points, points, 3, {}, "d = b + c - a, pairwise distinct points"};
  const auto row = [size](std::size_t t) { return static_cast<long>(t / size); };
  const auto col = [size](std::size_t t) { return static_cast<long>(t % size); };
  const long n = static_cast<long>(size);
  for (std::size_t a = 0; a < points; ++a) {
    for (std::size_t b = 0; b < points; ++b) {
      for (std::size_t c = 0; c < points; ++c) {
        const long r = row(b) + row(c) - row(a);
        const long q = col(b) + col(c) - col(a);
        if (r < 0 || r >= n || q < 0 || q >= n) continue;
        const std::size_t dd = lattice_token(size, static_cast<std::size_t>(r), static_cast<std::size_t>(q));
        if (a == b || a == c || b == c || dd == a || dd == b || dd == c) continue;
        d.samples.push_back({{a, b, c}, dd});
      }
    }
  }
  return d;
}

TokenDataset gen_permutation_s4() {
  const FiniteGroup s4 = FiniteGroup::symmetric(4);
  const std::size_t order = s4.order();
  TokenDataset d{"perm", order, order, 2, {},
                 "S4 lexicographic one-line order; (x o y)(i) = x(y(i))"};
  for (std::size_t x = 0; x < order; ++x) {
    for (std::size_t y = 0; y < order; ++y) d.samples.push_back({{x, y}, s4.product(x, y)});
  }
  return d;
}

DenseDataset gen_toy(int which_case) {
  DenseDataset d;
  if (which_case == 1) {
    d.name = "toy1";
    d.features = Tensor::matrix(2, 2, {1.0, 1.0, -1.0, -1.0});
    d.targets = {0, 1};
    d.classes = 2;
  } else if (which_case == 2) {
    d.name = "toy2";
    d.features = Tensor::matrix(5, 2, {0.0, 0.0, 1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0});
    d.targets = {0, 1, 2, 3, 4};
    d.classes = 5;
  } else {
    throw ContractError("toy case must be 1 or 2");
  }
  return d;
}

DenseDataset load_mnist(const std::string& images_path, const std::string& labels_path) {
  std::ifstream images = open_binary(images_path);
  std::ifstream labels = open_binary(labels_path);

  if (read_be32(images, images_path) != kIdxImagesMagic) {
    throw FormatError(images_path + ": bad IDX image magic");
  }
  const std::uint32_t count = read_be32(images, images_path);
  const std::uint32_t rows = read_be32(images, images_path);
  const std::uint32_t cols = read_be32(images, images_path);
  if (read_be32(labels, labels_path) != kIdxLabelsMagic) {
    throw FormatError(labels_path + ": bad IDX label magic");
  }
  const std::uint32_t label_count = read_be32(labels, labels_path);
  if (label_count != count) {
    throw ConsistencyError("image count " + std::to_string(count) + " != label count " +
                           std::to_string(label_count));
  }

  const std::size_t pixels = std::size_t{rows} * cols;
  const std::vector<unsigned char> raw = read_bytes(images, pixels * count, images_path);
  const std::vector<unsigned char> raw_labels = read_bytes(labels, count, labels_path);

  DenseDataset d;
  d.name = "mnist";
  d.classes = 10;
  d.features = Tensor({count, pixels});
  for (std::size_t i = 0; i < raw.size(); ++i) d.features[i] = normalize_pixel(raw[i]);
  d.targets.reserve(count);
  for (unsigned char l : raw_labels) {
    if (l > 9) throw FormatError(labels_path + ": label " + std::to_string(l) + " outside 0..9");
    d.targets.push_back(l);
  }
  return d;
}

Split split(std::size_t count, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ContractError("train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(count)));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return s;
}

LabeledBatch make_batch(const TokenDataset& data, std::span<const std::size_t> indices) {
  TokenBatch tokens{data.tokens_per_input, {}};
  tokens.ids.reserve(indices.size() * data.tokens_per_input);
  LabeledBatch out;
  out.targets.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= data.samples.size()) throw IndexError("sample index out of range");
    const TokenSample& s = data.samples[i];
    tokens.ids.insert(tokens.ids.end(), s.tokens.begin(), s.tokens.end());
    out.targets.push_back(s.target);
  }
  out.inputs = std::move(tokens);
  return out;
}

LabeledBatch make_batch(const DenseDataset& data, std::span<const std::size_t> indices) {
  const std::size_t dim = data.features.cols();
  Tensor features({indices.size(), dim});
  LabeledBatch out;
  out.targets.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    if (i >= data.size()) throw IndexError("sample index out of range");
    const auto src = data.features.row_span(i);
    std::copy(src.begin(), src.end(), features.row_span(r).begin());
    out.targets.push_back(data.targets[i]);
  }
  out.inputs = std::move(features);
  return out;
}

LabeledBatch full_batch(const TokenDataset& data) {
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_batch(data, all);
}

LabeledBatch full_batch(const DenseDataset& data) {
  return LabeledBatch{data.features, data.targets};
}

void write_csv(const TokenDataset& data, std::ostream& out) {
  for (std::size_t t = 0; t < data.tokens_per_input; ++t) out << "token_" << t << ',';
  out << "target\n";
  for (const TokenSample& s : data.samples) {
    for (std::size_t tok : s.tokens) out << tok << ',';
    out << s.target << '\n';
  }
}

bool is_token_task(const std::string& task) {
  return task == "modadd" || task == "equiv" || task == "genealogy" || task == "icl" ||
         task == "perm";
}

TokenDataset make_token_task(const std::string& task) {
  if (task == "modadd") return gen_modular_addition();
  if (task == "equiv") return gen_equivalence();
  if (task == "genealogy") return gen_genealogy();
  if (task == "icl") return gen_lattice_icl();
  if (task == "perm") return gen_permutation_s4();
  throw ContractError("unknown token task '" + task + "'");
}

}  // namespace harmonic
