#include "harmonic/groups.hpp"

#include <algorithm>
#include <numeric>

#include "harmonic/errors.hpp"

namespace harmonic {

std::vector<Permutation> all_permutations(int n) {
  if (n < 0) throw ContractError("permutation degree must be non-negative");
  Permutation p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  std::vector<Permutation> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

Permutation compose(const Permutation& x, const Permutation& y) {
  if (x.size() != y.size()) throw DimensionError("compose: permutations of different degree");
  Permutation out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[static_cast<std::size_t>(y[i])];
  return out;
}

Permutation inverse(const Permutation& p) {
  Permutation out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(p[i])] = static_cast<int>(i);
  return out;
}

std::string one_line(const Permutation& p) {
  std::string s = "(";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i > 0) s += ",";
    s += std::to_string(p[i] + 1);
  }
  return s + ")";
}

FiniteGroup::FiniteGroup(std::vector<std::vector<std::size_t>> table) : table_(std::move(table)) {
  const std::size_t n = table_.size();
  if (n == 0) throw ContractError("group must be nonempty");
  for (const auto& row : table_) {
    if (row.size() != n) throw DimensionError("multiplication table must be square");
  }
  bool found = false;
  for (std::size_t e = 0; e < n && !found; ++e) {
    bool ok = true;
    for (std::size_t a = 0; a < n && ok; ++a) ok = table_[e][a] == a && table_[a][e] == a;
    if (ok) {
      identity_ = e;
      found = true;
    }
  }
  if (!found) throw ContractError("multiplication table has no identity");
  inverses_.assign(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (table_[a][b] == identity_) inverses_[a] = b;
    }
    if (inverses_[a] == n) throw ContractError("multiplication table has a non-invertible element");
  }
}

FiniteGroup FiniteGroup::symmetric(int n) {
  std::vector<Permutation> elems = all_permutations(n);
  const std::size_t order = elems.size();
  std::vector<std::vector<std::size_t>> table(order, std::vector<std::size_t>(order));
  for (std::size_t i = 0; i < order; ++i) {
    for (std::size_t j = 0; j < order; ++j) {
      const Permutation c = compose(elems[i], elems[j]);
      table[i][j] = static_cast<std::size_t>(
          std::lower_bound(elems.begin(), elems.end(), c) - elems.begin());
    }
  }
  FiniteGroup g(std::move(table));
  g.elements_ = std::move(elems);
  return g;
}

std::vector<std::size_t> FiniteGroup::closure(const std::vector<std::size_t>& generators) const {
  std::vector<bool> in(order(), false);
  std::vector<std::size_t> members{identity_};
  in[identity_] = true;
  for (std::size_t g : generators) {
    if (g >= order()) throw IndexError("closure: element id out of range");
  }
  // Breadth-first: multiply every member by every generator on the right.
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (std::size_t g : generators) {
      const std::size_t p = table_[members[i]][g];
      if (!in[p]) {
        in[p] = true;
        members.push_back(p);
      }
    }
  }
  std::sort(members.begin(), members.end());
  return members;
}

bool FiniteGroup::is_subgroup(const std::vector<std::size_t>& subset) const {
  std::vector<bool> in(order(), false);
  for (std::size_t a : subset) {
    if (a >= order()) return false;
    in[a] = true;
  }
  if (!in[identity_]) return false;
  for (std::size_t a : subset) {
    for (std::size_t b : subset) {
      if (!in[table_[a][b]]) return false;
    }
  }
  return true;
}

bool FiniteGroup::is_normal(const std::vector<std::size_t>& subgroup) const {
  std::vector<bool> in(order(), false);
  for (std::size_t a : subgroup) in[a] = true;
  for (std::size_t g = 0; g < order(); ++g) {
    for (std::size_t h : subgroup) {
      if (!in[table_[table_[g][h]][inverses_[g]]]) return false;
    }
  }
  return true;
}

}  // namespace harmonic
