#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hypermatch/tensor.hpp"

namespace hypermatch {

/// Binary assignment under row constraints: one chosen column per block.
/// As a vector, block i is the unit coordinate vector at columns[i].
struct BinaryAssignment {
  int n1 = 0;
  int n2 = 0;
  std::vector<index_t> columns;  // length n1, each in [0, n2)
};

inline AssignmentVector to_vector(const BinaryAssignment& b) {
  AssignmentVector x = AssignmentVector::zeros(b.n1, b.n2);
  for (int i = 0; i < b.n1; ++i) x.entries[static_cast<std::size_t>(i) * b.n2 + b.columns[i]] = 1.0;
  return x;
}

/// Nearest binary assignment: per block, the smallest column index attaining
/// the block maximum.
inline BinaryAssignment nearest_assignment(const AssignmentVector& x) {
  BinaryAssignment b;
  b.n1 = x.n1;
  b.n2 = x.n2;
  b.columns.resize(static_cast<std::size_t>(x.n1));
  for (int i = 0; i < x.n1; ++i) {
    const auto blk = x.block(i);
    int best = 0;
    for (int p = 1; p < x.n2; ++p)
      if (blk[p] > blk[best]) best = p;
    b.columns[static_cast<std::size_t>(i)] = static_cast<index_t>(best);
  }
  return b;
}

/// Matching score of a binary assignment: the total value of stored triples
/// whose three indices are all selected, i.e. -f at the vectorized
/// assignment.
inline double matching_score(const SparseAffinityTensor& T, const BinaryAssignment& b) {
  if (T.n1() != b.n1 || T.n2() != b.n2)
    throw std::invalid_argument("matching_score: dimension mismatch");
  return -eval_objective(T, to_vector(b));
}

/// Reduce a feasible point of the row-simplex relaxation to support size n1
/// by replacing every block holding more than one positive entry with the
/// unit vector at its largest entry (smallest index on ties). At a
/// stationary point the objective is invariant under each replacement; this
/// routine performs the reduction and leaves verification to the caller.
inline AssignmentVector sparsify_minimizer(const SparseAffinityTensor& T, const AssignmentVector& y) {
  detail::require_same_shape(T, y);
  constexpr double feas_tol = 1e-9;
  for (double v : y.entries) {
    if (!(v >= -feas_tol) || !(v <= 1.0 + feas_tol) || !std::isfinite(v))
      throw std::invalid_argument("sparsify_minimizer: entries must lie in [0, 1]");
  }
  for (int i = 0; i < y.n1; ++i) {
    if (std::abs(y.block_sum(i) - 1.0) > feas_tol)
      throw std::invalid_argument("sparsify_minimizer: block sums must equal 1");
  }

  AssignmentVector x = y;
  for (int i = 0; i < x.n1; ++i) {
    auto blk = x.block(i);
    int support = 0;
    int best = 0;
    for (int p = 0; p < x.n2; ++p) {
      if (blk[p] > 0.0) ++support;
      if (blk[p] > blk[best]) best = p;
    }
    if (support <= 1) continue;
    for (int p = 0; p < x.n2; ++p) blk[p] = 0.0;
    blk[best] = 1.0;
  }
  return x;
}

}  // namespace hypermatch
