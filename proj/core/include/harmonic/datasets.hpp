#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "harmonic/models.hpp"
#include "harmonic/tensor.hpp"

namespace harmonic {

struct TokenSample {
  std::vector<std::size_t> tokens;
  std::size_t target = 0;
};

/// Algorithmic task: every input is a fixed-width tuple of token ids.
struct TokenDataset {
  std::string name;
  std::size_t vocab_in = 0;
  std::size_t vocab_out = 0;
  std::size_t tokens_per_input = 0;
  std::vector<TokenSample> samples;
  /// Free-form conventions recorded with run metadata.
  std::string notes;

  std::size_t size() const noexcept { return samples.size(); }
};

/// Real-valued features with integer labels (toy points, MNIST).
struct DenseDataset {
  std::string name;
  Tensor features;  // count x dim
  std::vector<std::size_t> targets;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return targets.size(); }
};

/// Inputs plus targets, ready for a model.
struct LabeledBatch {
  InputBatch inputs;
  std::vector<std::size_t> targets;

  std::size_t size() const noexcept { return targets.size(); }
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// (x, y) -> (x + y) mod p over all ordered pairs.
TokenDataset gen_modular_addition(std::size_t modulus = 31);
/// (x, y) with 0 <= x, y < range -> 1 iff x = y (mod modulus).
TokenDataset gen_equivalence(std::size_t range = 40, std::size_t modulus = 5);

/// Relations of the genealogy task, tokenized after the node tokens.
enum class Relation { parent = 0, grandparent = 1, sibling = 2 };

/// Complete binary tree with heap-indexed nodes 1..nodes. Node i has token
/// i - 1; relation r has token nodes + r. Queries without an answer (the
/// root's parent, etc.) are left out.
TokenDataset gen_genealogy(std::size_t nodes = 127);

/// Lattice point (row, col) -> token size * row + col.
std::size_t lattice_token(std::size_t size, std::size_t row, std::size_t col);
/// Ordered triples (a, b, c) of lattice points -> d = b + c - a, kept when d
/// is on the lattice and a, b, c, d are pairwise distinct.
TokenDataset gen_lattice_icl(std::size_t size = 5);

/// (x, y) in S4 x S4 -> x o y, with (x o y)(i) = x(y(i)); tokens follow the
/// lexicographic order of one-line notation.
TokenDataset gen_permutation_s4();

/// Case 1: (1,1) and (-1,-1) in two classes. Case 2: (0,0) surrounded by
/// (1,0), (0,1), (-1,0), (0,-1), five classes.
DenseDataset gen_toy(int which_case);

/// Reads an IDX image file (magic 0x00000803) and label file (magic
/// 0x00000801); pixels are scaled to [0, 1].
DenseDataset load_mnist(const std::string& images_path, const std::string& labels_path);

/// Seeded uniform shuffle; the first round(fraction * n) indices train.
Split split(std::size_t count, double fraction, std::uint64_t seed);

LabeledBatch make_batch(const TokenDataset& data, std::span<const std::size_t> indices);
LabeledBatch make_batch(const DenseDataset& data, std::span<const std::size_t> indices);
LabeledBatch full_batch(const TokenDataset& data);
LabeledBatch full_batch(const DenseDataset& data);

/// CSV with columns token_0..token_{T-1},target.
void write_csv(const TokenDataset& data, std::ostream& out);

/// Task registry used by the command line: modadd, equiv, genealogy, icl, perm.
TokenDataset make_token_task(const std::string& task);
bool is_token_task(const std::string& task);

}  // namespace harmonic
