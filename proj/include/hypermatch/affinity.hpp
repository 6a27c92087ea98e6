#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypermatch/kdtree.hpp"
#include "hypermatch/tensor.hpp"

// Affinity-tensor construction from two point sets: hyperedges are sampled
// on the first set, every ordered triple of the second set is a candidate,
// and each hyperedge is matched to its s closest candidates in triangle
// feature space.

namespace hypermatch {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct PointSet {
  std::vector<Point> points;
  int size() const { return static_cast<int>(points.size()); }
};

struct Hyperedge {
  index_t a = 0;
  index_t b = 0;
  index_t c = 0;
};

struct HyperedgeSet {
  std::vector<Hyperedge> triples;
};

/// Sines of the three interior angles, ordered by vertex. Invariant under
/// translation, rotation and uniform scaling.
struct TriangleFeature {
  std::array<double, 3> f{0.0, 0.0, 0.0};
};

inline double feature_distance2(const TriangleFeature& a, const TriangleFeature& b) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double diff = a.f[d] - b.f[d];
    s += diff * diff;
  }
  return s;
}

inline double feature_distance(const TriangleFeature& a, const TriangleFeature& b) {
  return std::sqrt(feature_distance2(a, b));
}

/// Degenerate triangles (coincident points or zero area) map to (0, 0, 0).
inline TriangleFeature triangle_feature(Point p, Point q, Point r) {
  const double dpq = std::hypot(q.x - p.x, q.y - p.y);
  const double dpr = std::hypot(r.x - p.x, r.y - p.y);
  const double dqr = std::hypot(r.x - q.x, r.y - q.y);
  // doubled triangle area; |u x v| = |u||v| sin(angle)
  const double area2 = std::abs((q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x));
  TriangleFeature t;
  if (dpq == 0.0 || dpr == 0.0 || dqr == 0.0 || area2 == 0.0) return t;
  t.f[0] = std::clamp(area2 / (dpq * dpr), 0.0, 1.0);
  t.f[1] = std::clamp(area2 / (dpq * dqr), 0.0, 1.0);
  t.f[2] = std::clamp(area2 / (dpr * dqr), 0.0, 1.0);
  return t;
}

/// `count` uniformly drawn triples of pairwise distinct point indices.
/// Repeats of the same unordered triple may occur; the tensor build
/// deduplicates them later.
inline HyperedgeSet sample_hyperedges(const PointSet& V, int count, std::uint64_t seed) {
  if (V.size() < 3) throw std::invalid_argument("sample_hyperedges: need at least 3 points");
  if (count < 1) throw std::invalid_argument("sample_hyperedges: count must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, V.size() - 1);
  HyperedgeSet E;
  E.triples.reserve(static_cast<std::size_t>(count));
  for (int e = 0; e < count; ++e) {
    Hyperedge h;
    h.a = static_cast<index_t>(pick(rng));
    do h.b = static_cast<index_t>(pick(rng));
    while (h.b == h.a);
    do h.c = static_cast<index_t>(pick(rng));
    while (h.c == h.a || h.c == h.b);
    E.triples.push_back(h);
  }
  return E;
}

/// Candidate hyperedge on the second point set, one of the
/// size*(size-1)*(size-2) ordered triples of distinct indices.
struct Candidate {
  index_t a = 0;
  index_t b = 0;
  index_t c = 0;
  TriangleFeature feature;
};

inline std::vector<Candidate> candidate_features(const PointSet& V2) {
  const int n = V2.size();
  if (n < 3) throw std::invalid_argument("candidate_features: need at least 3 points");
  std::vector<Candidate> out;
  out.reserve(static_cast<std::size_t>(n) * (n - 1) * (n - 2));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      for (int c = 0; c < n; ++c) {
        if (c == a || c == b) continue;
        out.push_back({static_cast<index_t>(a), static_cast<index_t>(b), static_cast<index_t>(c),
                       triangle_feature(V2.points[static_cast<std::size_t>(a)],
                                        V2.points[static_cast<std::size_t>(b)],
                                        V2.points[static_cast<std::size_t>(c)])});
      }
    }
  return out;
}

/// Linear-scan k-nearest candidates by feature distance, ties toward the
/// lower candidate index. Returns fewer than s indices only when the
/// candidate list is shorter than s.
inline std::vector<int> knn_features(const TriangleFeature& query,
                                     std::span<const Candidate> candidates, int s) {
  if (candidates.empty()) throw std::invalid_argument("knn_features: empty candidate list");
  if (s < 1) throw std::invalid_argument("knn_features: s must be >= 1");
  std::vector<int> idx(candidates.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto better = [&](int a, int b) {
    const double da = feature_distance2(query, candidates[static_cast<std::size_t>(a)].feature);
    const double db = feature_distance2(query, candidates[static_cast<std::size_t>(b)].feature);
    return da != db ? da < db : a < b;
  };
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(s), idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(), better);
  idx.resize(keep);
  return idx;
}

// Above this candidate count, nearest-neighbour lookups go through a k-d
// tree on the 3-d features instead of a linear scan.
inline constexpr std::size_t kKnnTreeThreshold = 50000;

/// Assemble the sparse affinity tensor. For every hyperedge of E1 and each
/// of its s nearest candidate triples in V2, the matching value is
/// exp(-dist / mean dist), the mean running over exactly the selected
/// pairs; a zero mean (all matches exact) yields value 1. Flattened index
/// triples are canonicalized to l < j < k, duplicates keep the maximum.
inline SparseAffinityTensor build_affinity(const PointSet& V1, const PointSet& V2,
                                           const HyperedgeSet& E1, int s) {
  const int n1 = V1.size();
  const int n2 = V2.size();
  if (n1 > n2) throw std::invalid_argument("build_affinity: need |V1| <= |V2|");
  if (n1 < 1) throw std::invalid_argument("build_affinity: V1 is empty");
  if (s < 1) throw std::invalid_argument("build_affinity: s must be >= 1");
  for (const Hyperedge& h : E1.triples) {
    if (h.a < 0 || h.a >= n1 || h.b < 0 || h.b >= n1 || h.c < 0 || h.c >= n1)
      throw std::invalid_argument("build_affinity: hyperedge index out of range");
    if (h.a == h.b || h.b == h.c || h.a == h.c)
      throw std::invalid_argument("build_affinity: hyperedge indices must be distinct");
  }
  if (E1.triples.empty()) return SparseAffinityTensor(n1, n2);

  const std::vector<Candidate> cands = candidate_features(V2);

  struct Selection {
    std::size_t edge;
    int cand;
    double dist;
  };
  std::vector<Selection> picks;
  picks.reserve(E1.triples.size() * static_cast<std::size_t>(s));

  std::vector<TriangleFeature> queries(E1.triples.size());
  for (std::size_t e = 0; e < E1.triples.size(); ++e) {
    const Hyperedge& h = E1.triples[e];
    queries[e] = triangle_feature(V1.points[static_cast<std::size_t>(h.a)],
                                  V1.points[static_cast<std::size_t>(h.b)],
                                  V1.points[static_cast<std::size_t>(h.c)]);
  }

  // first pass: pick neighbours and record distances for the mean
  if (cands.size() >= kKnnTreeThreshold) {
    std::vector<std::array<double, 3>> pts(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) pts[i] = cands[i].feature.f;
    const KdTree<3> tree(std::move(pts));
    for (std::size_t e = 0; e < queries.size(); ++e) {
      for (int ci : tree.query(queries[e].f, std::min<int>(s, static_cast<int>(cands.size()))))
        picks.push_back({e, ci, feature_distance(queries[e], cands[static_cast<std::size_t>(ci)].feature)});
    }
  } else {
    for (std::size_t e = 0; e < queries.size(); ++e) {
      for (int ci : knn_features(queries[e], cands, s))
        picks.push_back({e, ci, feature_distance(queries[e], cands[static_cast<std::size_t>(ci)].feature)});
    }
  }

  double mean = 0.0;
  for (const Selection& p : picks) mean += p.dist;
  mean /= static_cast<double>(picks.size());

  // second pass: values through the normalized exponential
  std::vector<Triple> triples;
  triples.reserve(picks.size());
  for (const Selection& p : picks) {
    const double value = mean > 0.0 ? std::exp(-p.dist / mean) : 1.0;
    const Hyperedge& h = E1.triples[p.edge];
    const Candidate& c = cands[static_cast<std::size_t>(p.cand)];
    std::array<index_t, 3> idx = {static_cast<index_t>(h.a * n2 + c.a),
                                  static_cast<index_t>(h.b * n2 + c.b),
                                  static_cast<index_t>(h.c * n2 + c.c)};
    std::sort(idx.begin(), idx.end());
    triples.push_back({idx[0], idx[1], idx[2], value});
  }
  return SparseAffinityTensor::from_triples_max(n1, n2, std::move(triples));
}

// CSV formats: point sets are "id,x,y" with ids 0..size-1 in order,
// hyperedge sets are "a,b,c".

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_csv_double(const std::string& s, const char* what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("csv: bad ") + what + ": '" + s + "'");
  }
  if (pos != s.size()) throw std::runtime_error(std::string("csv: bad ") + what + ": '" + s + "'");
  return v;
}

inline long parse_csv_int(const std::string& s, const char* what) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("csv: bad ") + what + ": '" + s + "'");
  }
  if (pos != s.size()) throw std::runtime_error(std::string("csv: bad ") + what + ": '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_points_csv(std::ostream& os, const PointSet& V) {
  os << "id,x,y\n";
  for (int i = 0; i < V.size(); ++i) {
    const Point& p = V.points[static_cast<std::size_t>(i)];
    os << i << ',' << detail::format_double(p.x) << ',' << detail::format_double(p.y) << '\n';
  }
}

inline PointSet read_points_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("point csv: empty file");
  {
    const auto header = detail::split_csv_line(line);
    if (header != std::vector<std::string>{"id", "x", "y"})
      throw std::runtime_error("point csv: expected header 'id,x,y'");
  }
  PointSet V;
  int expected_id = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 3) throw std::runtime_error("point csv: expected 3 fields per row");
    if (detail::parse_csv_int(fields[0], "id") != expected_id)
      throw std::runtime_error("point csv: ids must be 0..size-1 in order");
    const double x = detail::parse_csv_double(fields[1], "x");
    const double y = detail::parse_csv_double(fields[2], "y");
    if (!std::isfinite(x) || !std::isfinite(y)) throw std::runtime_error("point csv: coordinates must be finite");
    V.points.push_back({x, y});
    ++expected_id;
  }
  return V;
}

inline void write_hyperedges_csv(std::ostream& os, const HyperedgeSet& E) {
  os << "a,b,c\n";
  for (const Hyperedge& h : E.triples) os << h.a << ',' << h.b << ',' << h.c << '\n';
}

inline HyperedgeSet read_hyperedges_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("hyperedge csv: empty file");
  {
    const auto header = detail::split_csv_line(line);
    if (header != std::vector<std::string>{"a", "b", "c"})
      throw std::runtime_error("hyperedge csv: expected header 'a,b,c'");
  }
  HyperedgeSet E;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 3) throw std::runtime_error("hyperedge csv: expected 3 fields per row");
    E.triples.push_back({static_cast<index_t>(detail::parse_csv_int(fields[0], "a")),
                         static_cast<index_t>(detail::parse_csv_int(fields[1], "b")),
                         static_cast<index_t>(detail::parse_csv_int(fields[2], "c"))});
  }
  return E;
}

inline void save_points_csv(const std::filesystem::path& path, const PointSet& V) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  write_points_csv(os, V);
}

inline PointSet load_points_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open point csv: " + path.string());
  return read_points_csv(is);
}

inline void save_hyperedges_csv(const std::filesystem::path& path, const HyperedgeSet& E) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  write_hyperedges_csv(os, E);
}

inline HyperedgeSet load_hyperedges_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open hyperedge csv: " + path.string());
  return read_hyperedges_csv(is);
}

}  // namespace hypermatch
