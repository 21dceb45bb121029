#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace harmonic {

/// One-line notation, 0-based: p[i] is the image of i.
using Permutation = std::vector<int>;

/// All permutations of {0..n-1} in lexicographic order of one-line notation.
std::vector<Permutation> all_permutations(int n);

/// (x o y)(i) = x(y(i)): apply y first, then x.
Permutation compose(const Permutation& x, const Permutation& y);
Permutation inverse(const Permutation& p);
/// 1-based one-line notation, e.g. "(2,1,3,4)".
std::string one_line(const Permutation& p);

/// Finite group given by its multiplication table over element ids 0..n-1.
class FiniteGroup {
 public:
  explicit FiniteGroup(std::vector<std::vector<std::size_t>> table);

  /// S_n with elements in lexicographic order; product(i, j) is the id of
  /// elements[i] o elements[j].
  static FiniteGroup symmetric(int n);

  std::size_t order() const noexcept { return table_.size(); }
  std::size_t product(std::size_t a, std::size_t b) const { return table_[a][b]; }
  std::size_t identity() const noexcept { return identity_; }
  std::size_t inverse_of(std::size_t a) const { return inverses_[a]; }
  const std::vector<Permutation>& elements() const noexcept { return elements_; }

  /// Smallest subgroup containing the generators (sorted element ids).
  std::vector<std::size_t> closure(const std::vector<std::size_t>& generators) const;
  /// Closed under products and contains the identity.
  bool is_subgroup(const std::vector<std::size_t>& subset) const;
  bool is_normal(const std::vector<std::size_t>& subgroup) const;

 private:
  std::vector<std::vector<std::size_t>> table_;
  std::vector<std::size_t> inverses_;
  std::vector<Permutation> elements_;
  std::size_t identity_ = 0;
};

}  // namespace harmonic
