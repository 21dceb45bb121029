#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "harmonic/groups.hpp"
#include "harmonic/optim.hpp"
#include "harmonic/tensor.hpp"

namespace harmonic {

// ---------------------------------------------------------------------------
// Principal components

/// PCA of the rows of a V x N matrix.
///
/// `components` is k x N with orthonormal rows ordered by decreasing singular
/// value, k = min(V, N). Each component is signed so that its
/// largest-magnitude coordinate is positive. `projections` is V x k.
struct PcaResult {
  Tensor mean;
  Tensor components;
  std::vector<double> singular_values;
  std::vector<double> explained_ratio;
  Tensor projections;
};

/// Throws ContractError for fewer than two rows or when every row is the
/// same point (zero total variance).
PcaResult pca(const Tensor& rows);

/// Sum of the first k explained-variance ratios; k past the last component
/// returns the full sum.
double cumulative_ev(const PcaResult& result, std::size_t k);
/// cumulative_ev for k = 1..number of components.
std::vector<double> ev_curve(const PcaResult& result);

// ---------------------------------------------------------------------------
// Parallelograms

/// Token ids (i, j, m, n) that ideally satisfy E_i + E_n = E_j + E_m.
using Quadruple = std::array<std::size_t, 4>;

/// |P_i + P_n - P_j - P_m| / sigma on the top-2 principal projections P, with
/// sigma = sqrt(mean_k |P_k|^2). Throws ContractError when sigma is zero.
std::vector<double> parallelogram_loss(const Tensor& embeddings, std::span<const Quadruple> quads);

/// Lattice quadruples (a, b, c, d) with a + d = b + c and pairwise distinct
/// points, i.e. the in-context-learning samples. When more than `max_count`
/// exist a seeded uniform subset of that size is returned.
std::vector<Quadruple> lattice_quadruples(std::size_t size, std::size_t max_count,
                                          std::uint64_t seed);

double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// Training dynamics

/// Epoch at which `accuracy` first starts a run of `window` consecutive
/// evaluations strictly above `threshold`, or nothing.
std::optional<std::size_t> sustained_epoch(std::span<const std::size_t> epochs,
                                           std::span<const double> accuracy, double threshold,
                                           std::size_t window);

struct GrokkingEpochs {
  std::optional<std::size_t> train;
  std::optional<std::size_t> test;
};

GrokkingEpochs grokking_epochs(const RunMetrics& metrics, double threshold = 0.9,
                               std::size_t window = 20);

/// Fraction of entries with |w| < tau.
double near_zero_fraction(const Tensor& weights, double tau = 0.01);

// ---------------------------------------------------------------------------
// Coset structure

/// All subgroups of `group`, found by closing every pair of elements and then
/// repeatedly extending known subgroups by single elements. Sorted by order,
/// then lexicographically by element ids.
std::vector<std::vector<std::size_t>> enumerate_subgroups(const FiniteGroup& group);
std::vector<std::vector<std::size_t>> s4_subgroups();

enum class CosetSide { left, right };
std::string side_name(CosetSide side);

/// Partition of a group into cosets gH (left) or Hg (right). labels[g] is the
/// coset index of element g, numbered by first appearance.
struct CosetPartition {
  std::vector<std::size_t> subgroup;
  CosetSide side = CosetSide::left;
  std::vector<std::size_t> labels;

  std::size_t block_count() const;
};

/// Left and right partitions for every proper nontrivial subgroup, left
/// before right, in subgroup order. No deduplication.
std::vector<CosetPartition> coset_partitions(const FiniteGroup& group,
                                             const std::vector<std::vector<std::size_t>>& subgroups);
/// Drops partitions whose blocks equal an earlier partition's blocks (normal
/// subgroups give identical left and right partitions).
std::vector<CosetPartition> deduplicate(const std::vector<CosetPartition>& partitions);

/// Mean silhouette with Euclidean distances between rows of `points`. A
/// point alone in its cluster scores 0. Throws ContractError when all points
/// share one label.
double silhouette(const Tensor& points, std::span<const std::size_t> labels);

struct BestCoset {
  CosetPartition partition;
  double score = 0.0;
};

/// Projects 24 S4 embeddings onto their top two principal components and
/// returns the deduplicated coset partition with the highest silhouette.
/// Ties keep the smaller subgroup, then the earlier partition.
BestCoset best_coset_partition(const Tensor& embeddings);

}  // namespace harmonic
