#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypermatch/constraints.hpp"
#include "hypermatch/rounding.hpp"
#include "hypermatch/tensor.hpp"

// Independent brute-force and finite-difference oracles. Test and
// verification code only; nothing on the solver path calls into here.

namespace hypermatch {

struct BruteForceResult {
  BinaryAssignment assignment;
  double score = 0.0;
};

namespace detail {

inline double score_of_columns(const SparseAffinityTensor& T, const std::vector<index_t>& cols) {
  const int n2 = T.n2();
  double acc = 0.0;
  for (const Triple& t : T.triples()) {
    if (cols[static_cast<std::size_t>(t.l / n2)] == t.l % n2 &&
        cols[static_cast<std::size_t>(t.j / n2)] == t.j % n2 &&
        cols[static_cast<std::size_t>(t.k / n2)] == t.k % n2)
      acc += t.value;
  }
  return acc;
}

}  // namespace detail

/// Exhaustive search over the feasible binary assignments. Returns a
/// maximizer of the matching score; ties resolve to the lexicographically
/// smallest column vector. Guards: row mode requires n2^n1 <= 1e7, and
/// permutation mode requires n1 == n2 <= 9.
inline BruteForceResult brute_force(const SparseAffinityTensor& T, ConstraintMode mode) {
  const int n1 = T.n1(), n2 = T.n2();
  BruteForceResult best;
  best.assignment.n1 = n1;
  best.assignment.n2 = n2;

  if (mode == ConstraintMode::row) {
    double count = std::pow(static_cast<double>(n2), static_cast<double>(n1));
    if (count > 1e7)
      throw std::invalid_argument("brute_force: row mode needs n2^n1 <= 1e7, got " +
                                  std::to_string(count));
    std::vector<index_t> cols(static_cast<std::size_t>(n1), 0);
    best.assignment.columns = cols;
    best.score = detail::score_of_columns(T, cols);
    // odometer enumeration is ascending lexicographic, so the first maximum
    // found is the smallest tie
    while (true) {
      int i = n1 - 1;
      while (i >= 0 && cols[static_cast<std::size_t>(i)] == n2 - 1) {
        cols[static_cast<std::size_t>(i)] = 0;
        --i;
      }
      if (i < 0) break;
      ++cols[static_cast<std::size_t>(i)];
      const double s = detail::score_of_columns(T, cols);
      if (s > best.score) {
        best.score = s;
        best.assignment.columns = cols;
      }
    }
    return best;
  }

  if (n1 != n2) throw std::invalid_argument("brute_force: permutation mode requires n1 == n2");
  if (n1 > 9) throw std::invalid_argument("brute_force: permutation mode needs n1 <= 9, got " +
                                          std::to_string(n1));
  std::vector<index_t> cols(static_cast<std::size_t>(n1));
  std::iota(cols.begin(), cols.end(), 0);
  best.assignment.columns = cols;
  best.score = detail::score_of_columns(T, cols);
  while (std::next_permutation(cols.begin(), cols.end())) {
    const double s = detail::score_of_columns(T, cols);
    if (s > best.score) {
      best.score = s;
      best.assignment.columns = cols;
    }
  }
  return best;
}

/// Central finite differences of an arbitrary objective, one coordinate at a
/// time.
template <typename Objective>
std::vector<double> fd_gradient(Objective&& objective, std::vector<double> x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("fd_gradient: step must be positive");
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t l = 0; l < x.size(); ++l) {
    const double saved = x[l];
    x[l] = saved + step;
    const double fp = objective(x);
    x[l] = saved - step;
    const double fm = objective(x);
    x[l] = saved;
    g[l] = (fp - fm) / (2.0 * step);
  }
  return g;
}

/// Literal evaluation of -(1/6) A x^3: every stored triple is expanded into
/// its six index permutations and each term is summed individually. Cost
/// guard n <= 200.
inline double full_expand_objective(const SparseAffinityTensor& T, const AssignmentVector& x) {
  detail::require_same_shape(T, x);
  if (T.size() > 200) throw std::invalid_argument("full_expand_objective: guarded to n <= 200");
  const double* e = x.entries.data();
  double acc = 0.0;
  for (const Triple& t : T.triples()) {
    std::array<index_t, 3> idx = {t.l, t.j, t.k};
    // canonical storage is strictly increasing, so the six permutations are
    // distinct entries of the symmetric tensor
    do {
      acc += t.value * e[idx[0]] * e[idx[1]] * e[idx[2]];
    } while (std::next_permutation(idx.begin(), idx.end()));
  }
  return -acc / 6.0;
}

}  // namespace hypermatch
