#include "harmonic/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "harmonic/random.hpp"

namespace harmonic {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

bool all_rows_identical(const Tensor& rows) {
  const auto first = rows.row_span(0);
  for (std::size_t i = 1; i < rows.rows(); ++i) {
    if (!std::equal(first.begin(), first.end(), rows.row_span(i).begin())) return false;
  }
  return true;
}

// Blocks of a partition as sorted lists of sorted element ids.
std::vector<std::vector<std::size_t>> canonical_blocks(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t g = 0; g < labels.size(); ++g) by_label[labels[g]].push_back(g);
  std::vector<std::vector<std::size_t>> blocks;
  for (auto& [label, members] : by_label) blocks.push_back(std::move(members));
  std::sort(blocks.begin(), blocks.end());
  return blocks;
}

bool subgroup_less(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

}  // namespace

PcaResult pca(const Tensor& rows) {
  require_matrix(rows, "pca");
  const std::size_t count = rows.rows();
  const std::size_t dim = rows.cols();
  if (count < 2) throw ContractError("pca needs at least two rows");
  if (dim == 0) throw DimensionError("pca on zero-width rows");
  if (all_rows_identical(rows)) {
    throw ContractError("pca: all rows identical, explained variance undefined");
  }

  PcaResult r;
  r.mean = Tensor({1, dim});
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) r.mean[j] += rows(i, j);
  }
  for (double& v : r.mean.data()) v /= static_cast<double>(count);

  Eigen::MatrixXd centered(count, dim);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows(i, j) - r.mean[j];
    }
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();
  const std::size_t k = static_cast<std::size_t>(sigma.size());

  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += sigma(static_cast<Eigen::Index>(i)) * sigma(static_cast<Eigen::Index>(i));
  if (!(total > 0.0)) throw ContractError("pca: zero total variance");

  r.components = Tensor({k, dim});
  for (std::size_t c = 0; c < k; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    Eigen::Index pivot = 0;
    v.col(col).cwiseAbs().maxCoeff(&pivot);
    const double sign = v(pivot, col) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < dim; ++j) r.components(c, j) = sign * v(static_cast<Eigen::Index>(j), col);
    const double s = sigma(col);
    r.singular_values.push_back(s);
    r.explained_ratio.push_back(s * s / total);
  }

  r.projections = Tensor({count, k});
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double dot = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        dot += centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * r.components(c, j);
      }
      r.projections(i, c) = dot;
    }
  }
  return r;
}

double cumulative_ev(const PcaResult& result, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(k, result.explained_ratio.size()); ++i) {
    s += result.explained_ratio[i];
  }
  return s;
}

std::vector<double> ev_curve(const PcaResult& result) {
  std::vector<double> out;
  double s = 0.0;
  for (double r : result.explained_ratio) out.push_back(s += r);
  return out;
}

std::vector<double> parallelogram_loss(const Tensor& embeddings, std::span<const Quadruple> quads) {
  require_matrix(embeddings, "parallelogram_loss");
  if (embeddings.rows() < 2 || all_rows_identical(embeddings)) {
    throw ContractError("parallelogram_loss: degenerate embeddings (sigma = 0)");
  }
  const PcaResult p = pca(embeddings);
  const std::size_t count = embeddings.rows();
  const std::size_t dims = std::min<std::size_t>(2, p.projections.cols());

  double sq = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t c = 0; c < dims; ++c) sq += p.projections(k, c) * p.projections(k, c);
  }
  const double sigma = std::sqrt(sq / static_cast<double>(count));
  if (!(sigma > 0.0)) throw ContractError("parallelogram_loss: degenerate embeddings (sigma = 0)");

  std::vector<double> out;
  out.reserve(quads.size());
  for (const Quadruple& q : quads) {
    for (std::size_t t : q) {
      if (t >= count) throw IndexError("parallelogram_loss: token " + std::to_string(t) + " out of range");
    }
    double s = 0.0;
    for (std::size_t c = 0; c < dims; ++c) {
      const double r = p.projections(q[0], c) + p.projections(q[3], c) - p.projections(q[1], c) -
                       p.projections(q[2], c);
      s += r * r;
    }
    out.push_back(std::sqrt(s) / sigma);
  }
  return out;
}

std::vector<Quadruple> lattice_quadruples(std::size_t size, std::size_t max_count,
                                          std::uint64_t seed) {
  const TokenDataset icl = gen_lattice_icl(size);
  std::vector<Quadruple> all;
  all.reserve(icl.size());
  for (const TokenSample& s : icl.samples) {
    all.push_back({s.tokens[0], s.tokens[1], s.tokens[2], s.target});
  }
  if (all.size() <= max_count) return all;
  Rng rng(seed);
  rng.shuffle(std::span<Quadruple>(all));
  all.resize(max_count);
  return all;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::optional<std::size_t> sustained_epoch(std::span<const std::size_t> epochs,
                                           std::span<const double> accuracy, double threshold,
                                           std::size_t window) {
  if (epochs.size() != accuracy.size()) throw DimensionError("sustained_epoch: length mismatch");
  if (window == 0) throw ContractError("sustained_epoch: window must be positive");
  std::size_t streak = 0;
  for (std::size_t i = 0; i < accuracy.size(); ++i) {
    streak = accuracy[i] > threshold ? streak + 1 : 0;
    if (streak == window) return epochs[i + 1 - window];
  }
  return std::nullopt;
}

GrokkingEpochs grokking_epochs(const RunMetrics& metrics, double threshold, std::size_t window) {
  return {sustained_epoch(metrics.epoch, metrics.train_acc, threshold, window),
          sustained_epoch(metrics.epoch, metrics.test_acc, threshold, window)};
}

double near_zero_fraction(const Tensor& weights, double tau) {
  if (weights.size() == 0) throw ContractError("near_zero_fraction of an empty tensor");
  std::size_t n = 0;
  for (double w : weights.data()) {
    if (std::abs(w) < tau) ++n;
  }
  return static_cast<double>(n) / static_cast<double>(weights.size());
}

std::vector<std::vector<std::size_t>> enumerate_subgroups(const FiniteGroup& group) {
  std::set<std::vector<std::size_t>> found;
  const std::size_t n = group.order();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) found.insert(group.closure({a, b}));
  }
  // Subgroups needing more than two generators are reached by extension.
  std::vector<std::vector<std::size_t>> frontier(found.begin(), found.end());
  while (!frontier.empty()) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& h : frontier) {
      for (std::size_t g = 0; g < n; ++g) {
        if (std::binary_search(h.begin(), h.end(), g)) continue;
        std::vector<std::size_t> gens = h;
        gens.push_back(g);
        auto extended = group.closure(gens);
        if (found.insert(extended).second) next.push_back(std::move(extended));
      }
    }
    frontier = std::move(next);
  }
  std::vector<std::vector<std::size_t>> out(found.begin(), found.end());
  std::sort(out.begin(), out.end(), subgroup_less);
  return out;
}

std::vector<std::vector<std::size_t>> s4_subgroups() {
  return enumerate_subgroups(FiniteGroup::symmetric(4));
}

std::string side_name(CosetSide side) { return side == CosetSide::left ? "left" : "right"; }

std::size_t CosetPartition::block_count() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

std::vector<CosetPartition> coset_partitions(const FiniteGroup& group,
                                             const std::vector<std::vector<std::size_t>>& subgroups) {
  const std::size_t n = group.order();
  std::vector<CosetPartition> out;
  for (const auto& h : subgroups) {
    if (h.size() <= 1 || h.size() >= n) continue;
    if (!group.is_subgroup(h)) throw ContractError("coset_partitions: not a subgroup");
    for (CosetSide side : {CosetSide::left, CosetSide::right}) {
      CosetPartition p{h, side, std::vector<std::size_t>(n, n)};
      std::size_t next = 0;
      for (std::size_t g = 0; g < n; ++g) {
        if (p.labels[g] != n) continue;
        for (std::size_t x : h) {
          const std::size_t member = side == CosetSide::left ? group.product(g, x) : group.product(x, g);
          p.labels[member] = next;
        }
        ++next;
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<CosetPartition> deduplicate(const std::vector<CosetPartition>& partitions) {
  std::set<std::vector<std::vector<std::size_t>>> seen;
  std::vector<CosetPartition> out;
  for (const CosetPartition& p : partitions) {
    if (seen.insert(canonical_blocks(p.labels)).second) out.push_back(p);
  }
  return out;
}

double silhouette(const Tensor& points, std::span<const std::size_t> labels) {
  require_matrix(points, "silhouette");
  const std::size_t n = points.rows();
  if (labels.size() != n) throw DimensionError("silhouette: one label per point required");
  if (n == 0) throw ContractError("silhouette of no points");

  std::map<std::size_t, std::size_t> index;
  for (std::size_t l : labels) index.emplace(l, index.size());
  const std::size_t clusters = index.size();
  if (clusters < 2) throw ContractError("silhouette needs at least two clusters");
  std::vector<std::size_t> cluster(n);
  std::vector<std::size_t> sizes(clusters, 0);
  for (std::size_t i = 0; i < n; ++i) {
    cluster[i] = index[labels[i]];
    ++sizes[cluster[i]];
  }

  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      const auto a = points.row_span(i);
      const auto b = points.row_span(j);
      for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
      dist[i * n + j] = dist[j * n + i] = std::sqrt(s);
    }
  }

  double total = 0.0;
  std::vector<double> sums(clusters);
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[cluster[i]] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) sums[cluster[j]] += dist[i * n + j];
    const double a = sums[cluster[i]] / static_cast<double>(sizes[cluster[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < clusters; ++c) {
      if (c != cluster[i]) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

BestCoset best_coset_partition(const Tensor& embeddings) {
  const FiniteGroup s4 = FiniteGroup::symmetric(4);
  require_matrix(embeddings, "best_coset_partition");
  if (embeddings.rows() != s4.order()) {
    throw DimensionError("best_coset_partition expects 24 embeddings, got " +
                         std::to_string(embeddings.rows()));
  }
  const PcaResult p = pca(embeddings);
  const std::size_t dims = std::min<std::size_t>(2, p.projections.cols());
  Tensor projected({embeddings.rows(), dims});
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    for (std::size_t c = 0; c < dims; ++c) projected(i, c) = p.projections(i, c);
  }

  const auto partitions = deduplicate(coset_partitions(s4, enumerate_subgroups(s4)));
  BestCoset best;
  bool have = false;
  for (const CosetPartition& part : partitions) {
    const double score = silhouette(projected, part.labels);
    // Partitions arrive ordered by subgroup order, so strict > keeps the
    // smaller subgroup and then the earlier partition on ties.
    if (!have || score > best.score) {
      best = {part, score};
      have = true;
    }
  }
  return best;
}

}  // namespace harmonic
