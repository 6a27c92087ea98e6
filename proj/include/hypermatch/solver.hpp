#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypermatch/constraints.hpp"
#include "hypermatch/match_result.hpp"
#include "hypermatch/rounding.hpp"
#include "hypermatch/tensor.hpp"

// Quadratic penalty method with a projected-gradient subsolver. The outer
// loop drives the penalty weight sigma upward until the support of the
// iterate settles at one entry per block; the inner loop takes active-set
// projected-gradient steps on the box-constrained penalty objective
//
//   theta(x) = f(x) + (sigma/2) * sum_i (block_sum_i(x) - 1)^2
//
// (plus the column terms under row_and_column constraints).

namespace hypermatch {

struct SolverConfig {
  double sigma0 = 10.0;
  double sigma_max = 1e5;
  double growth_fast = 1.3;
  double growth_slow = 1.2;
  double violation_threshold = 0.1;
  int window = 5;
  double M = 10000.0;
  double tol = 1e-5;
  double rho = 1e-6;
  double eps = 1e-2;
  double beta = 0.5;
  int inner_steps = 1;
  int max_outer = 500;
  double support_tau = 1e-8;
  ConstraintMode mode = ConstraintMode::row;

  void validate() const {
    if (!(rho > 0.0 && rho < 0.5)) throw std::invalid_argument("solver config: need 0 < rho < 1/2");
    if (!(eps > 0.0)) throw std::invalid_argument("solver config: need eps > 0");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("solver config: need 0 < beta < 1");
    if (!(M >= 1.0)) throw std::invalid_argument("solver config: need M >= 1");
    if (!(sigma0 > 0.0)) throw std::invalid_argument("solver config: need sigma0 > 0");
    if (!(sigma_max >= sigma0)) throw std::invalid_argument("solver config: need sigma_max >= sigma0");
    if (!(growth_fast >= 1.0 && growth_slow >= 1.0))
      throw std::invalid_argument("solver config: growth factors must be >= 1");
    if (!(violation_threshold > 0.0)) throw std::invalid_argument("solver config: need violation_threshold > 0");
    if (window < 1) throw std::invalid_argument("solver config: need window >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("solver config: need tol > 0");
    if (inner_steps < 1) throw std::invalid_argument("solver config: need inner_steps >= 1");
    if (max_outer < 1) throw std::invalid_argument("solver config: need max_outer >= 1");
    if (!(support_tau >= 0.0)) throw std::invalid_argument("solver config: need support_tau >= 0");
  }
};

/// Apply one "key = value" assignment with keys named after the
/// SolverConfig fields. Unknown keys are rejected.
inline void apply_config_entry(SolverConfig& cfg, const std::string& key, const std::string& value) {
  const auto as_double = [&](const char* name) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("solver config: bad number for ") + name + ": '" + value + "'");
    }
    if (pos != value.size())
      throw std::invalid_argument(std::string("solver config: bad number for ") + name + ": '" + value + "'");
    return v;
  };
  const auto as_int = [&](const char* name) {
    const double v = as_double(name);
    if (v != std::floor(v)) throw std::invalid_argument(std::string("solver config: ") + name + " must be an integer");
    return static_cast<int>(v);
  };

  if (key == "sigma0") cfg.sigma0 = as_double("sigma0");
  else if (key == "sigma_max") cfg.sigma_max = as_double("sigma_max");
  else if (key == "growth_fast") cfg.growth_fast = as_double("growth_fast");
  else if (key == "growth_slow") cfg.growth_slow = as_double("growth_slow");
  else if (key == "violation_threshold") cfg.violation_threshold = as_double("violation_threshold");
  else if (key == "window") cfg.window = as_int("window");
  else if (key == "M") cfg.M = as_double("M");
  else if (key == "tol") cfg.tol = as_double("tol");
  else if (key == "rho") cfg.rho = as_double("rho");
  else if (key == "eps") cfg.eps = as_double("eps");
  else if (key == "beta") cfg.beta = as_double("beta");
  else if (key == "inner_steps") cfg.inner_steps = as_int("inner_steps");
  else if (key == "max_outer") cfg.max_outer = as_int("max_outer");
  else if (key == "support_tau") cfg.support_tau = as_double("support_tau");
  else if (key == "mode") cfg.mode = parse_constraint_mode(value);
  else throw std::invalid_argument("solver config: unknown key '" + key + "'");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Flat "key = value" file; '#' starts a comment.
inline SolverConfig read_solver_config(std::istream& is, SolverConfig cfg = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("solver config line " + std::to_string(lineno) + ": expected 'key = value'");
    apply_config_entry(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

inline SolverConfig load_solver_config(const std::filesystem::path& path, SolverConfig cfg = {}) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path.string());
  return read_solver_config(is, cfg);
}

/// Equality-constraint violations: row[i] is block sum minus one; col is
/// filled only under row_and_column constraints (requires n1 == n2).
struct Violations {
  std::vector<double> row;
  std::vector<double> col;
};

inline Violations violations(const AssignmentVector& x, ConstraintMode mode) {
  Violations v;
  v.row.resize(static_cast<std::size_t>(x.n1));
  for (int i = 0; i < x.n1; ++i) v.row[static_cast<std::size_t>(i)] = x.block_sum(i) - 1.0;
  if (mode == ConstraintMode::row_and_column) {
    if (x.n1 != x.n2)
      throw std::invalid_argument("violations: row_and_column mode requires n1 == n2");
    v.col.assign(static_cast<std::size_t>(x.n2), -1.0);
    for (int i = 0; i < x.n1; ++i) {
      const auto blk = x.block(i);
      for (int p = 0; p < x.n2; ++p) v.col[static_cast<std::size_t>(p)] += blk[p];
    }
  }
  return v;
}

inline double penalty_objective(const SparseAffinityTensor& T, const AssignmentVector& x,
                                double sigma, ConstraintMode mode) {
  detail::require_same_shape(T, x);
  const Violations v = violations(x, mode);
  double quad = 0.0;
  for (double h : v.row) quad += h * h;
  for (double h : v.col) quad += h * h;
  return eval_objective(T, x) + 0.5 * sigma * quad;
}

inline std::vector<double> penalty_gradient(const SparseAffinityTensor& T, const AssignmentVector& x,
                                            double sigma, ConstraintMode mode) {
  detail::require_same_shape(T, x);
  std::vector<double> g = gradient(T, x);
  const Violations v = violations(x, mode);
  for (int i = 0; i < x.n1; ++i) {
    double* gb = g.data() + static_cast<std::size_t>(i) * x.n2;
    const double sh = sigma * v.row[static_cast<std::size_t>(i)];
    for (int p = 0; p < x.n2; ++p) gb[p] += sh;
  }
  if (!v.col.empty()) {
    for (int i = 0; i < x.n1; ++i) {
      double* gb = g.data() + static_cast<std::size_t>(i) * x.n2;
      for (int p = 0; p < x.n2; ++p) gb[p] += sigma * v.col[static_cast<std::size_t>(p)];
    }
  }
  return g;
}

/// Estimated active set: coordinates expected to sit at a box bound at the
/// subproblem solution.
struct ActiveSetEstimate {
  std::vector<std::uint8_t> active;  // 1 iff the coordinate is in I_j
  double eps_j = 0.0;
  double omega_j = 0.0;
};

inline ActiveSetEstimate estimate_active_set(const AssignmentVector& x, const std::vector<double>& g,
                                             double eps, double M) {
  const std::size_t n = x.entries.size();
  if (g.size() != n) throw std::invalid_argument("estimate_active_set: gradient size mismatch");
  ActiveSetEstimate a;
  double w2 = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    const double step = x.entries[l] - std::clamp(x.entries[l] - g[l], 0.0, M);
    w2 += step * step;
  }
  a.omega_j = std::sqrt(w2);
  a.eps_j = std::min(eps, a.omega_j);
  a.active.resize(n, 0);
  for (std::size_t l = 0; l < n; ++l) {
    const double xl = x.entries[l];
    a.active[l] = (xl <= a.eps_j && g[l] > 0.0) || (xl >= M - a.eps_j && g[l] < 0.0);
  }
  return a;
}

namespace detail {

// Active coordinates are classified by gradient sign: positive points to
// the lower bound, negative to the upper one. The lower-bound residual
// min(x, g) vanishes as x reaches 0 with g >= 0; the upper bound takes the
// mirrored form max(g, x - M) so it vanishes as x reaches M with g <= 0.
inline double active_residual(double x, double g, double M) {
  return g > 0.0 ? std::min(x, g) : std::max(g, x - M);
}

}  // namespace detail

/// Optimality residual of the projected-gradient iteration: the bound-aware
/// form on the estimated active set, plain g elsewhere.
inline std::vector<double> pg_residual(const AssignmentVector& x, const std::vector<double>& g,
                                       const ActiveSetEstimate& a, double M) {
  std::vector<double> delta(g.size());
  for (std::size_t l = 0; l < g.size(); ++l)
    delta[l] = a.active[l] ? detail::active_residual(x.entries[l], g[l], M) : g[l];
  return delta;
}

struct PGDirection {
  std::vector<double> d;
  double eta = 1.0;
};

/// Search direction: active coordinates move onto their bound (unit Z), so
/// -x toward the lower bound and M - x toward the upper one; the rest take
/// a scaled steepest descent -eta * g with eta = n1 / ||g||_inf over the
/// inactive coordinates (eta = 1 when that norm vanishes). The denominator
/// is floored at 1: an unbounded eta would keep the largest inactive move
/// at length n1 however small the gradient gets, the unit step would never
/// be accepted, and bound coordinates could never land exactly on the
/// bound.
inline PGDirection pg_direction(const AssignmentVector& x, const std::vector<double>& g,
                                const ActiveSetEstimate& a, int n1, double M) {
  PGDirection dir;
  double gmax = 0.0;
  for (std::size_t l = 0; l < g.size(); ++l)
    if (!a.active[l]) gmax = std::max(gmax, std::abs(g[l]));
  dir.eta = gmax > 0.0 ? static_cast<double>(n1) / std::max(gmax, 1.0) : 1.0;
  dir.d.resize(g.size());
  for (std::size_t l = 0; l < g.size(); ++l) {
    if (a.active[l]) dir.d[l] = g[l] > 0.0 ? -x.entries[l] : M - x.entries[l];
    else dir.d[l] = -dir.eta * g[l];
  }
  return dir;
}

struct LineSearchResult {
  double alpha = 1.0;
  int backtracks = 0;
  bool stalled = false;
};

inline constexpr int kMaxBacktracks = 60;

namespace detail {

// theta(trial) - theta(x) evaluated as a sum of per-term differences. The
// direct subtraction of two theta values loses everything below
// eps * |theta|, which is too coarse to drive the residual to tolerance at
// large sigma; the telescoped form stays accurate for tiny steps.
inline double penalty_delta(const SparseAffinityTensor& T, const AssignmentVector& x,
                            const AssignmentVector& trial, double sigma, ConstraintMode mode) {
  const double* xe = x.entries.data();
  const double* te = trial.entries.data();

  double df = 0.0;
  for (const Triple& t : T.triples()) {
    // a'b'c' - abc = (a'-a) b c + a' (b'-b) c + a' b' (c'-c)
    df -= t.value * ((te[t.l] - xe[t.l]) * xe[t.j] * xe[t.k] +
                     te[t.l] * (te[t.j] - xe[t.j]) * xe[t.k] +
                     te[t.l] * te[t.j] * (te[t.k] - xe[t.k]));
  }

  double dquad = 0.0;
  for (int i = 0; i < x.n1; ++i) {
    double s = 0.0, ds = 0.0;
    const double* xb = xe + static_cast<std::size_t>(i) * x.n2;
    const double* tb = te + static_cast<std::size_t>(i) * x.n2;
    for (int p = 0; p < x.n2; ++p) {
      s += xb[p];
      ds += tb[p] - xb[p];
    }
    // (s' - 1)^2 - (s - 1)^2 with s' = s + ds
    dquad += ds * (2.0 * s + ds - 2.0);
  }
  if (mode == ConstraintMode::row_and_column) {
    for (int p = 0; p < x.n2; ++p) {
      double s = 0.0, ds = 0.0;
      for (int i = 0; i < x.n1; ++i) {
        const std::size_t l = static_cast<std::size_t>(i) * x.n2 + p;
        s += xe[l];
        ds += te[l] - xe[l];
      }
      dquad += ds * (2.0 * s + ds - 2.0);
    }
  }
  return df + 0.5 * sigma * dquad;
}

}  // namespace detail

/// Armijo backtracking along the projected arc: accepts the largest
/// alpha = beta^m whose projected trial point decreases theta by at least
/// rho times the first-order model decrease.
inline LineSearchResult line_search(const SparseAffinityTensor& T, const AssignmentVector& x,
                                    const std::vector<double>& g, const std::vector<double>& d,
                                    const ActiveSetEstimate& a, const SolverConfig& cfg, double sigma) {
  double inactive_slope = 0.0;
  for (std::size_t l = 0; l < d.size(); ++l)
    if (!a.active[l]) inactive_slope += g[l] * d[l];

  AssignmentVector trial = x;
  double alpha = 1.0;
  for (int m = 0; m <= kMaxBacktracks; ++m) {
    double active_decrease = 0.0;
    for (std::size_t l = 0; l < d.size(); ++l) {
      const double t = std::clamp(x.entries[l] + alpha * d[l], 0.0, cfg.M);
      trial.entries[l] = t;
      if (a.active[l]) active_decrease += g[l] * (t - x.entries[l]);
    }
    const double lhs = detail::penalty_delta(T, x, trial, sigma, cfg.mode);
    const double rhs = cfg.rho * (alpha * inactive_slope + active_decrease);
    if (lhs <= rhs) return {alpha, m, false};
    alpha *= cfg.beta;
  }
  return {alpha / cfg.beta, kMaxBacktracks, true};
}

struct SubproblemResult {
  AssignmentVector x;
  int steps = 0;
  bool residual_converged = false;  // exited on ||delta|| <= tol
  bool stalled = false;             // some line search hit the backtrack cap
};

/// Up to cfg.inner_steps projected-gradient steps on the penalty subproblem
/// at fixed sigma, stopping early once the residual norm drops below
/// cfg.tol. The iterate stays inside [0, M]^n throughout.
inline SubproblemResult solve_subproblem(const SparseAffinityTensor& T, AssignmentVector x0,
                                         double sigma, const SolverConfig& cfg) {
  detail::require_same_shape(T, x0);
  SubproblemResult r{std::move(x0)};
  for (double& v : r.x.entries) v = std::clamp(v, 0.0, cfg.M);
  for (int step = 0; step < cfg.inner_steps; ++step) {
    const std::vector<double> g = penalty_gradient(T, r.x, sigma, cfg.mode);
    const ActiveSetEstimate a = estimate_active_set(r.x, g, cfg.eps, cfg.M);
    double res2 = 0.0;
    for (std::size_t l = 0; l < g.size(); ++l) {
      const double dl = a.active[l] ? detail::active_residual(r.x.entries[l], g[l], cfg.M) : g[l];
      res2 += dl * dl;
    }
    if (std::sqrt(res2) <= cfg.tol) {
      r.residual_converged = true;
      break;
    }
    const PGDirection dir = pg_direction(r.x, g, a, T.n1(), cfg.M);
    const LineSearchResult ls = line_search(T, r.x, g, dir.d, a, cfg, sigma);
    r.stalled = r.stalled || ls.stalled;
    bool moved = false;
    for (std::size_t l = 0; l < dir.d.size(); ++l) {
      const double next = std::clamp(r.x.entries[l] + ls.alpha * dir.d[l], 0.0, cfg.M);
      moved = moved || next != r.x.entries[l];
      r.x.entries[l] = next;
    }
    ++r.steps;
    if (!moved) break;  // fixed point: every further iteration would repeat it
  }
  return r;
}

/// Penalty-weight schedule: grow fast while the total violation is above the
/// threshold, grow slowly when the violation is a running maximum of the
/// recent window yet already below the threshold, otherwise hold.
inline double update_sigma(double sigma, double h_sum, double window_max, const SolverConfig& cfg) {
  if (h_sum >= cfg.violation_threshold) return std::min(cfg.sigma_max, cfg.growth_fast * sigma);
  if (h_sum >= window_max) return std::min(cfg.sigma_max, cfg.growth_slow * sigma);
  return sigma;
}

// Bound-classification band for the KKT residual. Projection produces exact
// zeros, but a coordinate parked within round-off of a bound is treated as
// sitting on it; see support_tau for the same reasoning on support counts.
inline constexpr double kBoundaryTau = 1e-8;

/// Max-norm KKT residual of the box-constrained penalty problem: gradient
/// entries are free to be positive at the lower bound and negative at the
/// upper bound; everything else counts.
inline double kkt_residual(const SparseAffinityTensor& T, const AssignmentVector& x, double sigma,
                           double M, ConstraintMode mode) {
  const std::vector<double> q = penalty_gradient(T, x, sigma, mode);
  double r = 0.0;
  for (std::size_t l = 0; l < q.size(); ++l) {
    const double xl = x.entries[l];
    double viol;
    if (xl <= kBoundaryTau) viol = std::abs(std::min(0.0, q[l]));
    else if (xl >= M - kBoundaryTau) viol = std::abs(std::max(0.0, q[l]));
    else viol = std::abs(q[l]);
    r = std::max(r, viol);
  }
  return r;
}

struct BlockViolationBound {
  double h = 0.0;      // block sum minus one
  double upper = 0.0;  // c_i / sigma
  bool pass = false;   // -tol <= h <= upper + tol
};

struct StationarityReport {
  std::vector<BlockViolationBound> blocks;
  double kkt = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

/// Checks the stationary-point bounds 0 <= h_i <= c_i / sigma with slack
/// 1e-6 plus the KKT residual at x.
inline StationarityReport check_stationarity_lemmas(const SparseAffinityTensor& T,
                                                    const AssignmentVector& x, double sigma,
                                                    double M, ConstraintMode mode = ConstraintMode::row) {
  StationarityReport rep;
  rep.kkt = kkt_residual(T, x, sigma, M, mode);
  rep.tolerance = 1e-6 + rep.kkt;
  const std::vector<double> cap = penalty_cap(T, M);
  const Violations v = violations(x, ConstraintMode::row);
  rep.blocks.resize(static_cast<std::size_t>(x.n1));
  for (int i = 0; i < x.n1; ++i) {
    BlockViolationBound& b = rep.blocks[static_cast<std::size_t>(i)];
    b.h = v.row[static_cast<std::size_t>(i)];
    b.upper = cap[static_cast<std::size_t>(i)] / sigma;
    b.pass = b.h >= -rep.tolerance && b.h <= b.upper + rep.tolerance;
    rep.pass = rep.pass && b.pass;
  }
  return rep;
}

inline int support_size(const AssignmentVector& x, double tau) {
  int s = 0;
  for (double v : x.entries)
    if (v > tau) ++s;
  return s;
}

/// Full penalty method from a caller-supplied start (clamped to the box).
/// Each outer iteration solves the subproblem inexactly, records violations
/// and support size, and grows sigma; the loop stops once the support is
/// below 1.2 * n1 or has not changed for ten consecutive iterations.
/// The final iterate is rounded to its nearest binary assignment.
inline MatchResult qppg_solve(const SparseAffinityTensor& T, const SolverConfig& cfg,
                              AssignmentVector x) {
  cfg.validate();
  detail::require_same_shape(T, x);
  if (cfg.mode == ConstraintMode::row_and_column && T.n1() != T.n2())
    throw std::invalid_argument("qppg_solve: row_and_column mode requires n1 == n2");

  const auto t_start = std::chrono::steady_clock::now();
  for (double& v : x.entries) v = std::clamp(v, 0.0, cfg.M);

  MatchResult res;
  double sigma = cfg.sigma0;
  std::vector<double> recent_h;  // last cfg.window values of h_sum
  int unchanged_run = 0;
  int prev_support = -1;

  for (int k = 1; k <= cfg.max_outer; ++k) {
    x = solve_subproblem(T, std::move(x), sigma, cfg).x;

    const Violations v = violations(x, cfg.mode);
    double h_sum = 0.0;
    for (double h : v.row) h_sum += std::abs(h);
    for (double h : v.col) h_sum += std::abs(h);

    const int support = support_size(x, cfg.support_tau);
    res.support_history.push_back(support);
    res.trace.push_back({k, sigma, h_sum, support, penalty_objective(T, x, sigma, cfg.mode),
                         kkt_residual(T, x, sigma, cfg.M, cfg.mode)});

    unchanged_run = (support == prev_support) ? unchanged_run + 1 : 1;
    prev_support = support;
    // the support is identified once it holds exactly one entry per block;
    // anything below n1 is a transient of the inexact subproblem solve
    if (support == T.n1() || unchanged_run >= 10) {
      res.converged = true;
      break;
    }

    const double window_max = recent_h.empty() ? 0.0 : *std::max_element(recent_h.begin(), recent_h.end());
    sigma = update_sigma(sigma, h_sum, window_max, cfg);
    recent_h.push_back(h_sum);
    if (static_cast<int>(recent_h.size()) > cfg.window) recent_h.erase(recent_h.begin());
  }

  res.outer_iterations = static_cast<int>(res.trace.size());
  res.assignment = nearest_assignment(x);
  res.score = matching_score(T, res.assignment);
  res.final_x = std::move(x);
  res.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

/// Default start: the all-ones vector.
inline MatchResult qppg_solve(const SparseAffinityTensor& T, const SolverConfig& cfg) {
  return qppg_solve(T, cfg, AssignmentVector::ones(T.n1(), T.n2()));
}

}  // namespace hypermatch
