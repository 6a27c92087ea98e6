#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypermatch {

using index_t = std::int32_t;

// One canonical entry of the affinity tensor. Indices satisfy l < j < k and
// address three pairwise distinct blocks of the assignment vector.
struct Triple {
  index_t l = 0;
  index_t j = 0;
  index_t k = 0;
  double value = 0.0;
};

namespace detail {

inline bool key_less(const Triple& a, const Triple& b) {
  if (a.l != b.l) return a.l < b.l;
  if (a.j != b.j) return a.j < b.j;
  return a.k < b.k;
}

inline bool key_equal(const Triple& a, const Triple& b) {
  return a.l == b.l && a.j == b.j && a.k == b.k;
}

// 17 significant digits round-trip any double through text.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Sparse symmetric order-3 affinity tensor over n = n1*n2 assignment slots.
///
/// Only the canonical representative with l < j < k of each symmetric entry
/// is stored; contractions account for the six index permutations
/// implicitly. Triples are kept sorted lexicographically so every sum runs
/// in a fixed order. Immutable after construction; safe to share across
/// threads.
class SparseAffinityTensor {
 public:
  SparseAffinityTensor(int n1, int n2) : n1_(n1), n2_(n2) {
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("tensor: n1 and n2 must be >= 1");
  }

  /// Strict factory: rejects any invariant violation, including duplicate
  /// (l, j, k) keys. Used by the file reader and tests.
  static SparseAffinityTensor from_triples(int n1, int n2, std::vector<Triple> triples) {
    return build(n1, n2, std::move(triples), /*max_dedup=*/false);
  }

  /// Like from_triples, but duplicate keys collapse to the maximum value.
  /// The affinity builder produces duplicates when two hyperedges induce the
  /// same index triple; keeping the max avoids double-counting one match.
  static SparseAffinityTensor from_triples_max(int n1, int n2, std::vector<Triple> triples) {
    return build(n1, n2, std::move(triples), /*max_dedup=*/true);
  }

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  int size() const { return n1_ * n2_; }
  int block_of(index_t i) const { return static_cast<int>(i / n2_); }
  std::size_t nnz() const { return triples_.size(); }
  const std::vector<Triple>& triples() const { return triples_; }

 private:
  static SparseAffinityTensor build(int n1, int n2, std::vector<Triple>&& ts, bool max_dedup) {
    SparseAffinityTensor T(n1, n2);
    const index_t n = static_cast<index_t>(n1) * static_cast<index_t>(n2);
    for (const Triple& t : ts) {
      if (t.l < 0 || t.k >= n) throw std::invalid_argument("tensor: index out of range");
      if (!(t.l < t.j && t.j < t.k)) throw std::invalid_argument("tensor: indices must satisfy l < j < k");
      const int bl = t.l / n2, bj = t.j / n2, bk = t.k / n2;
      if (bl == bj || bj == bk || bl == bk)
        throw std::invalid_argument("tensor: triple indices must come from distinct blocks");
      if (!(t.value >= 0.0) || !std::isfinite(t.value))
        throw std::invalid_argument("tensor: values must be finite and nonnegative");
    }
    std::sort(ts.begin(), ts.end(), [](const Triple& a, const Triple& b) {
      if (!detail::key_equal(a, b)) return detail::key_less(a, b);
      return a.value < b.value;  // duplicates ascending, max last
    });
    std::vector<Triple> out;
    out.reserve(ts.size());
    for (const Triple& t : ts) {
      if (!out.empty() && detail::key_equal(out.back(), t)) {
        if (!max_dedup) throw std::invalid_argument("tensor: duplicate (l, j, k) key");
        out.back().value = t.value;  // sorted so the later duplicate is the max
      } else {
        out.push_back(t);
      }
    }
    T.triples_ = std::move(out);
    return T;
  }

  int n1_;
  int n2_;
  std::vector<Triple> triples_;
};

/// Block-structured assignment variable: n1 blocks of length n2, block i
/// being row i of the vectorized assignment matrix.
struct AssignmentVector {
  int n1 = 0;
  int n2 = 0;
  std::vector<double> entries;

  static AssignmentVector constant(int n1, int n2, double v) {
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("assignment vector: n1 and n2 must be >= 1");
    AssignmentVector x;
    x.n1 = n1;
    x.n2 = n2;
    x.entries.assign(static_cast<std::size_t>(n1) * n2, v);
    return x;
  }
  static AssignmentVector zeros(int n1, int n2) { return constant(n1, n2, 0.0); }
  static AssignmentVector ones(int n1, int n2) { return constant(n1, n2, 1.0); }

  int size() const { return n1 * n2; }

  std::span<double> block(int i) { return {entries.data() + static_cast<std::size_t>(i) * n2, static_cast<std::size_t>(n2)}; }
  std::span<const double> block(int i) const {
    return {entries.data() + static_cast<std::size_t>(i) * n2, static_cast<std::size_t>(n2)};
  }

  double block_sum(int i) const {
    double s = 0.0;
    for (double v : block(i)) s += v;
    return s;
  }
};

namespace detail {

inline void require_same_shape(const SparseAffinityTensor& T, const AssignmentVector& x) {
  if (T.n1() != x.n1 || T.n2() != x.n2)
    throw std::invalid_argument("tensor/assignment dimension mismatch");
}

}  // namespace detail

/// f(x) = -(1/6) A x^3. Each stored triple stands for the six symmetric
/// entries it represents, so the canonical sum needs no 1/6 factor.
inline double eval_objective(const SparseAffinityTensor& T, const AssignmentVector& x) {
  detail::require_same_shape(T, x);
  const double* e = x.entries.data();
  double acc = 0.0;
  for (const Triple& t : T.triples()) acc += t.value * e[t.l] * e[t.j] * e[t.k];
  return -acc;
}

/// Gradient of f; slot l collects -value * x_j * x_k from every stored
/// triple containing l, and symmetrically for j and k.
inline std::vector<double> gradient(const SparseAffinityTensor& T, const AssignmentVector& x) {
  detail::require_same_shape(T, x);
  const double* e = x.entries.data();
  std::vector<double> g(static_cast<std::size_t>(T.size()), 0.0);
  for (const Triple& t : T.triples()) {
    g[t.l] -= t.value * e[t.j] * e[t.k];
    g[t.j] -= t.value * e[t.l] * e[t.k];
    g[t.k] -= t.value * e[t.l] * e[t.j];
  }
  return g;
}

/// Inner product of block i of x with block i of the gradient. A triple
/// touches a block in at most one index, so each touching triple contributes
/// exactly -value * x_l * x_j * x_k.
inline double block_objective(const SparseAffinityTensor& T, const AssignmentVector& x, int i) {
  detail::require_same_shape(T, x);
  if (i < 0 || i >= T.n1()) throw std::out_of_range("block_objective: block index out of range");
  const double* e = x.entries.data();
  double acc = 0.0;
  for (const Triple& t : T.triples()) {
    if (T.block_of(t.l) == i || T.block_of(t.j) == i || T.block_of(t.k) == i)
      acc -= t.value * e[t.l] * e[t.j] * e[t.k];
  }
  return acc;
}

/// Degree vector: u_l is the total value of all stored triples containing l.
inline std::vector<double> degree_vector(const SparseAffinityTensor& T) {
  std::vector<double> u(static_cast<std::size_t>(T.size()), 0.0);
  for (const Triple& t : T.triples()) {
    u[t.l] += t.value;
    u[t.j] += t.value;
    u[t.k] += t.value;
  }
  return u;
}

/// Per-block penalty-violation cap: c_i = M^2 * max of the degree vector
/// over block i. Bounds how far a stationary point of the penalized problem
/// can overshoot the row-sum constraint.
inline std::vector<double> penalty_cap(const SparseAffinityTensor& T, double M) {
  if (!(M >= 1.0)) throw std::invalid_argument("penalty_cap: M must be >= 1");
  const std::vector<double> u = degree_vector(T);
  std::vector<double> c(static_cast<std::size_t>(T.n1()), 0.0);
  for (int i = 0; i < T.n1(); ++i) {
    double m = 0.0;
    for (int p = 0; p < T.n2(); ++p) m = std::max(m, u[static_cast<std::size_t>(i) * T.n2() + p]);
    c[i] = M * M * m;
  }
  return c;
}

// Text format: header "n1 n2 nnz", then one "l j k value" line per stored
// triple, 0-based, l < j < k.

inline void write_tensor(std::ostream& os, const SparseAffinityTensor& T) {
  os << T.n1() << ' ' << T.n2() << ' ' << T.nnz() << '\n';
  for (const Triple& t : T.triples())
    os << t.l << ' ' << t.j << ' ' << t.k << ' ' << detail::format_double(t.value) << '\n';
}

inline SparseAffinityTensor read_tensor(std::istream& is) {
  long long n1 = 0, n2 = 0, nnz = 0;
  if (!(is >> n1 >> n2 >> nnz)) throw std::runtime_error("tensor file: expected header 'n1 n2 nnz'");
  if (n1 < 1 || n2 < 1 || nnz < 0) throw std::runtime_error("tensor file: invalid header values");
  std::vector<Triple> ts(static_cast<std::size_t>(nnz));
  for (long long r = 0; r < nnz; ++r) {
    Triple& t = ts[static_cast<std::size_t>(r)];
    if (!(is >> t.l >> t.j >> t.k >> t.value))
      throw std::runtime_error("tensor file: truncated or malformed triple at row " + std::to_string(r));
  }
  try {
    return SparseAffinityTensor::from_triples(static_cast<int>(n1), static_cast<int>(n2), std::move(ts));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("tensor file: ") + e.what());
  }
}

inline void save_tensor(const std::filesystem::path& path, const SparseAffinityTensor& T) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  write_tensor(os, T);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline SparseAffinityTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open tensor file: " + path.string());
  return read_tensor(is);
}

}  // namespace hypermatch
