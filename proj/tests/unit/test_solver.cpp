#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "hypermatch/oracle.hpp"
#include "hypermatch/solver.hpp"
#include "test_helpers.hpp"

using namespace hypermatch;

namespace {

SolverConfig tight_config() {
  SolverConfig cfg;
  cfg.inner_steps = 2000;
  cfg.tol = 1e-10;
  return cfg;
}

}  // namespace

TEST_CASE("penalty objective") {
  const SparseAffinityTensor empty(2, 2);
  SECTION("all-ones vector pays the squared row violations") {
    CHECK(penalty_objective(empty, AssignmentVector::ones(2, 2), 10.0, ConstraintMode::row) == 10.0);
  }
  SECTION("zero vector pays the same") {
    CHECK(penalty_objective(empty, AssignmentVector::zeros(2, 2), 10.0, ConstraintMode::row) == 10.0);
  }
  SECTION("row-feasible points reduce to the raw objective") {
    const auto T = SparseAffinityTensor::from_triples(3, 3, {{0, 4, 8, 1.0}});
    const auto x = to_vector(BinaryAssignment{3, 3, {0, 1, 2}});
    CHECK(penalty_objective(T, x, 123.0, ConstraintMode::row) == eval_objective(T, x));
  }
  SECTION("row-and-column mode doubles up on the all-ones square") {
    CHECK(penalty_objective(empty, AssignmentVector::ones(2, 2), 10.0,
                            ConstraintMode::row_and_column) == 20.0);
  }
  SECTION("row-and-column mode requires a square problem") {
    const SparseAffinityTensor rect(2, 3);
    CHECK_THROWS_AS(penalty_objective(rect, AssignmentVector::ones(2, 3), 10.0,
                                      ConstraintMode::row_and_column),
                    std::invalid_argument);
  }
}

TEST_CASE("penalty gradient on explicit inputs") {
  const SparseAffinityTensor empty(2, 2);
  SECTION("all-ones square, row mode") {
    for (double v : penalty_gradient(empty, AssignmentVector::ones(2, 2), 10.0, ConstraintMode::row))
      CHECK(v == 10.0);
  }
  SECTION("feasible point of the empty tensor is flat") {
    const auto x = to_vector(BinaryAssignment{2, 2, {1, 0}});
    for (double v : penalty_gradient(empty, x, 10.0, ConstraintMode::row)) CHECK(v == 0.0);
  }
  SECTION("row-and-column mode adds the column violations") {
    for (double v : penalty_gradient(empty, AssignmentVector::ones(2, 2), 10.0,
                                     ConstraintMode::row_and_column))
      CHECK(v == 20.0);
  }
}

TEST_CASE("penalty gradient matches finite differences of the penalty objective") {
  std::mt19937_64 rng(41);
  for (ConstraintMode mode : {ConstraintMode::row, ConstraintMode::row_and_column}) {
    const auto T = hmtest::random_tensor(4, 4, 50, rng);
    const auto x = hmtest::random_vector(4, 4, rng);
    const double sigma = 17.0;
    const auto g = penalty_gradient(T, x, sigma, mode);
    const auto g_fd = fd_gradient(
        [&](const std::vector<double>& v) {
          return penalty_objective(T, AssignmentVector{4, 4, v}, sigma, mode);
        },
        x.entries, 1e-6);
    for (std::size_t l = 0; l < g.size(); ++l)
      CHECK(std::abs(g[l] - g_fd[l]) <= 1e-5 * std::max(1.0, std::abs(g_fd[l])));
  }
}

TEST_CASE("violations") {
  SECTION("all ones") {
    const auto v = violations(AssignmentVector::ones(2, 3), ConstraintMode::row);
    for (double h : v.row) CHECK(h == 2.0);
    CHECK(v.col.empty());
  }
  SECTION("binary assignments are feasible") {
    const auto v = violations(to_vector(BinaryAssignment{3, 3, {2, 0, 1}}), ConstraintMode::row);
    for (double h : v.row) CHECK(h == 0.0);
  }
  SECTION("zero vector") {
    const auto v = violations(AssignmentVector::zeros(2, 3), ConstraintMode::row);
    for (double h : v.row) CHECK(h == -1.0);
  }
  SECTION("column violations of a permutation vanish") {
    const auto v = violations(to_vector(BinaryAssignment{3, 3, {2, 0, 1}}),
                              ConstraintMode::row_and_column);
    for (double h : v.col) CHECK(h == 0.0);
    const auto w = violations(to_vector(BinaryAssignment{3, 3, {0, 0, 1}}),
                              ConstraintMode::row_and_column);
    CHECK(w.col == std::vector<double>{1.0, 0.0, -1.0});
  }
  SECTION("rectangular row_and_column is rejected") {
    CHECK_THROWS_AS(violations(AssignmentVector::ones(2, 3), ConstraintMode::row_and_column),
                    std::invalid_argument);
  }
}

TEST_CASE("active set estimation") {
  SECTION("small coordinate with uphill gradient is captured") {
    const AssignmentVector x{1, 2, {0.005, 0.5}};
    const std::vector<double> g = {0.3, 0.2};
    const auto a = estimate_active_set(x, g, 1e-2, 10000.0);
    CHECK(a.eps_j == 1e-2);  // omega is larger here
    CHECK(a.active[0] == 1);
    CHECK(a.active[1] == 0);
  }
  SECTION("zero gradient estimates nothing") {
    const AssignmentVector x{1, 3, {0.0, 0.2, 0.7}};
    const auto a = estimate_active_set(x, {0.0, 0.0, 0.0}, 1e-2, 1.0);
    CHECK(a.omega_j == 0.0);
    CHECK(a.eps_j == 0.0);
    for (auto f : a.active) CHECK(f == 0);
  }
  SECTION("upper bound with downhill gradient is captured") {
    const AssignmentVector x{1, 2, {10.0, 5.0}};
    const auto a = estimate_active_set(x, {-1.0, 0.0}, 1e-2, 10.0);
    CHECK(a.active[0] == 1);
    CHECK(a.active[1] == 0);
  }
}

TEST_CASE("projected-gradient residual") {
  const AssignmentVector x{1, 3, {0.0, 0.4, 0.2}};
  const std::vector<double> g = {2.0, -0.7, 0.1};
  ActiveSetEstimate a;
  a.active = {1, 0, 1};
  const auto delta = pg_residual(x, g, a, 10.0);
  CHECK(delta[0] == 0.0);   // min(0, 2)
  CHECK(delta[1] == -0.7);  // inactive copies the gradient
  CHECK(delta[2] == 0.1);   // min(0.2, 0.1)

  ActiveSetEstimate none;
  none.active = {0, 0, 0};
  const auto stationary = pg_residual(x, {0.0, 0.0, 0.0}, none, 10.0);
  for (double d : stationary) CHECK(d == 0.0);

  // upper-bound mirror: a coordinate resting on M with inward gradient is
  // optimal, one hovering below M still reports its gap
  const AssignmentVector upper{1, 2, {10.0, 9.2}};
  ActiveSetEstimate both;
  both.active = {1, 1};
  const auto du = pg_residual(upper, {-3.0, -2.0}, both, 10.0);
  CHECK(du[0] == 0.0);   // max(-3, 0)
  CHECK(du[1] == -0.8);  // max(-2, -0.8)
}

TEST_CASE("projected-gradient direction") {
  SECTION("active coordinates move to the bound, inactive ones are scaled descent") {
    const AssignmentVector x{1, 2, {0.004, 0.8}};
    ActiveSetEstimate a;
    a.active = {1, 0};
    const auto dir = pg_direction(x, {0.5, 5.0}, a, 30, 10000.0);
    CHECK(dir.eta == 6.0);  // 30 / 5
    CHECK(dir.d[0] == -0.004);
    CHECK(dir.d[1] == -30.0);
  }
  SECTION("upper-bound active coordinates move onto the bound") {
    const AssignmentVector x{1, 2, {9.99, 0.5}};
    ActiveSetEstimate a;
    a.active = {1, 0};
    const auto dir = pg_direction(x, {-4.0, 2.0}, a, 3, 10.0);
    CHECK(dir.d[0] == 10.0 - 9.99);
    CHECK(dir.d[1] == -3.0);  // eta = 3 / 2, step -1.5 * 2
  }
  SECTION("vanishing inactive gradient guards the scale") {
    const AssignmentVector x{1, 2, {0.3, 0.0}};
    ActiveSetEstimate a;
    a.active = {0, 1};
    const auto dir = pg_direction(x, {0.0, 1.0}, a, 4, 10000.0);
    CHECK(dir.eta == 1.0);
    CHECK(dir.d[0] == 0.0);
    CHECK(dir.d[1] == -0.0);
  }
}

TEST_CASE("line search") {
  const SparseAffinityTensor empty(2, 2);
  SolverConfig cfg;
  const auto x = AssignmentVector::ones(2, 2);
  const auto g = penalty_gradient(empty, x, 10.0, cfg.mode);
  ActiveSetEstimate none;
  none.active.assign(4, 0);

  SECTION("zero direction accepts immediately") {
    const auto ls = line_search(empty, x, g, {0.0, 0.0, 0.0, 0.0}, none, cfg, 10.0);
    CHECK(ls.alpha == 1.0);
    CHECK(ls.backtracks == 0);
    CHECK_FALSE(ls.stalled);
  }
  SECTION("in-box descent on the quadratic accepts the unit step") {
    const auto ls = line_search(empty, x, g, {-0.5, -0.5, -0.5, -0.5}, none, cfg, 10.0);
    CHECK(ls.alpha == 1.0);
  }
  SECTION("overshooting direction halves until the decrease shows") {
    // unit step and half step both clamp onto the zero vector, which does
    // not decrease theta; the quarter step lands on the feasible minimum
    const auto ls = line_search(empty, x, g, {-2.0, -2.0, -2.0, -2.0}, none, cfg, 10.0);
    CHECK(ls.alpha == 0.25);
    CHECK(ls.backtracks == 2);
  }
  SECTION("ascent direction never gets a meaningful step") {
    // theta increases along +g for every representable alpha, so the search
    // backtracks until the trial step is a numerical no-op
    const auto ls = line_search(empty, x, g, {0.5, 0.5, 0.5, 0.5}, none, cfg, 10.0);
    CHECK(ls.alpha <= 1e-12);
    CHECK(ls.backtracks >= 40);
    AssignmentVector trial = x;
    for (std::size_t l = 0; l < trial.entries.size(); ++l)
      trial.entries[l] = std::clamp(x.entries[l] + ls.alpha * 0.5, 0.0, cfg.M);
    CHECK(penalty_objective(empty, trial, 10.0, cfg.mode) <=
          penalty_objective(empty, x, 10.0, cfg.mode));
  }
}

TEST_CASE("line-search acceptance inequality holds at the returned step") {
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 20; ++rep) {
    const auto T = hmtest::random_tensor(4, 4, 60, rng);
    const auto x = hmtest::random_vector(4, 4, rng, 0.0, 2.0);
    SolverConfig cfg;
    const double sigma = 20.0;
    const auto g = penalty_gradient(T, x, sigma, cfg.mode);
    const auto a = estimate_active_set(x, g, cfg.eps, cfg.M);
    const auto dir = pg_direction(x, g, a, 4);
    const auto ls = line_search(T, x, g, dir.d, a, cfg, sigma);
    REQUIRE_FALSE(ls.stalled);

    AssignmentVector trial = x;
    double model = 0.0;
    for (std::size_t l = 0; l < dir.d.size(); ++l) {
      trial.entries[l] = std::clamp(x.entries[l] + ls.alpha * dir.d[l], 0.0, cfg.M);
      if (a.active[l]) model += g[l] * (trial.entries[l] - x.entries[l]);
      else model += ls.alpha * g[l] * dir.d[l];
    }
    const double lhs = penalty_objective(T, trial, sigma, cfg.mode) -
                       penalty_objective(T, x, sigma, cfg.mode);
    CHECK(lhs <= cfg.rho * model + 1e-14);
  }
}

TEST_CASE("subproblem solve") {
  SECTION("already-stationary input returns unchanged") {
    const SparseAffinityTensor empty(2, 2);
    const auto x0 = to_vector(BinaryAssignment{2, 2, {1, 0}});
    const auto r = solve_subproblem(empty, x0, 10.0, tight_config());
    CHECK(r.residual_converged);
    CHECK(r.steps == 0);
    CHECK(r.x.entries == x0.entries);
  }
  SECTION("inner_steps = 1 takes exactly one step") {
    std::mt19937_64 rng(47);
    const auto T = hmtest::random_tensor(3, 3, 20, rng);
    SolverConfig cfg;
    cfg.inner_steps = 1;
    const auto r = solve_subproblem(T, AssignmentVector::ones(3, 3), 10.0, cfg);
    CHECK(r.steps == 1);
  }
  SECTION("empty tensor converges to unit block sums") {
    const SparseAffinityTensor empty(2, 3);
    const auto r = solve_subproblem(empty, AssignmentVector::ones(2, 3), 10.0, tight_config());
    for (int i = 0; i < 2; ++i) CHECK(std::abs(r.x.block_sum(i) - 1.0) <= 1e-8);
  }
  SECTION("iterates stay inside the box") {
    std::mt19937_64 rng(53);
    const auto T = hmtest::random_tensor(4, 4, 60, rng);
    SolverConfig cfg;
    cfg.M = 2.0;
    cfg.inner_steps = 100;
    const auto r = solve_subproblem(T, AssignmentVector::ones(4, 4), 50.0, cfg);
    for (double v : r.x.entries) {
      CHECK(v >= 0.0);
      CHECK(v <= cfg.M);
    }
  }
}

TEST_CASE("theta decreases monotonically across inner steps at fixed sigma") {
  std::mt19937_64 rng(59);
  const auto T = hmtest::random_tensor(5, 5, 100, rng);
  SolverConfig cfg;
  cfg.inner_steps = 1;
  const double sigma = 25.0;
  auto x = AssignmentVector::ones(5, 5);
  double theta = penalty_objective(T, x, sigma, cfg.mode);
  for (int step = 0; step < 40; ++step) {
    x = solve_subproblem(T, std::move(x), sigma, cfg).x;
    const double next = penalty_objective(T, x, sigma, cfg.mode);
    CHECK(next <= theta + 1e-12);
    theta = next;
  }
}

TEST_CASE("sigma schedule") {
  SolverConfig cfg;
  SECTION("large violation grows fast") { CHECK(update_sigma(10.0, 0.5, 0.0, cfg) == 13.0); }
  SECTION("cap binds") { CHECK(update_sigma(1e5, 0.5, 0.0, cfg) == 1e5); }
  SECTION("cap binds from below") { CHECK(update_sigma(9e4, 0.5, 0.0, cfg) == 1e5); }
  SECTION("small violation below the window max holds") {
    CHECK(update_sigma(10.0, 0.05, 0.08, cfg) == 10.0);
  }
  SECTION("small violation at a running max grows slowly") {
    CHECK(update_sigma(10.0, 0.05, 0.05, cfg) == 12.0);
    CHECK(update_sigma(10.0, 0.05, 0.02, cfg) == 12.0);
  }
}

TEST_CASE("kkt residual branches") {
  const SparseAffinityTensor empty(2, 2);
  SECTION("stationary point") {
    CHECK(kkt_residual(empty, to_vector(BinaryAssignment{2, 2, {0, 1}}), 10.0, 10.0,
                       ConstraintMode::row) == 0.0);
  }
  SECTION("interior point reports the gradient norm") {
    // single block, sum 1.25: every slot sees q = sigma * 0.25
    const AssignmentVector x{1, 2, {0.75, 0.5}};
    CHECK(kkt_residual(SparseAffinityTensor(1, 2), x, 1.0, 10.0, ConstraintMode::row) == 0.25);
  }
  SECTION("positive gradient at the lower bound is feasible") {
    const AssignmentVector x{2, 2, {0.0, 2.0, 1.0, 1.0}};
    // q = 5 everywhere; slot 0 sits at the bound and drops out
    CHECK(kkt_residual(empty, x, 5.0, 10.0, ConstraintMode::row) == 5.0);
    const AssignmentVector interior{2, 2, {0.1, 1.9, 1.0, 1.0}};
    CHECK(kkt_residual(empty, interior, 5.0, 10.0, ConstraintMode::row) == 5.0);
  }
  SECTION("negative gradient at the upper bound is feasible") {
    const auto T = SparseAffinityTensor::from_triples(3, 3, {{0, 3, 6, 2.0}});
    const auto x = to_vector(BinaryAssignment{3, 3, {0, 0, 0}});
    // with M = 1 the selected slots sit at the bound carrying q = -2, the
    // rest carry q = 0: a stationary point of the boxed problem
    CHECK(kkt_residual(T, x, 10.0, 1.0, ConstraintMode::row) == 0.0);
    // widening the box makes those slots interior and the residual reappears
    CHECK(kkt_residual(T, x, 10.0, 10.0, ConstraintMode::row) == 2.0);
  }
}

TEST_CASE("stationarity report validates the violation bounds") {
  std::mt19937_64 rng(61);
  for (double sigma : {10.0, 100.0}) {
    const auto T = hmtest::random_tensor(4, 4, 60, rng);
    SolverConfig cfg;
    cfg.M = 100.0;
    cfg.inner_steps = 4000;
    cfg.tol = 1e-12;
    auto x = AssignmentVector::ones(4, 4);
    double kkt = 1.0;
    for (int round = 0; round < 50 && kkt > 1e-7; ++round) {
      x = solve_subproblem(T, std::move(x), sigma, cfg).x;
      kkt = kkt_residual(T, x, sigma, cfg.M, cfg.mode);
    }
    const auto rep = check_stationarity_lemmas(T, x, sigma, cfg.M);
    CHECK(rep.kkt <= 1e-6);
    CHECK(rep.pass);
    for (const auto& b : rep.blocks) {
      CHECK(b.h >= -rep.tolerance);
      CHECK(b.h <= b.upper + rep.tolerance);
    }
  }
}

TEST_CASE("qppg on the empty tensor stops by the unchanged-support rule") {
  const SparseAffinityTensor empty(2, 2);
  SolverConfig cfg;
  const auto res = qppg_solve(empty, cfg);
  CHECK(res.converged);
  CHECK(res.outer_iterations == 10);  // support never moves
  REQUIRE(res.assignment.columns.size() == 2);
  for (index_t c : res.assignment.columns) {
    CHECK(c >= 0);
    CHECK(c < 2);
  }
  CHECK(res.score == 0.0);
}

TEST_CASE("qppg recovers the unique scoring assignment") {
  const auto T = SparseAffinityTensor::from_triples(3, 3, {{0, 4, 8, 1.0}});
  const auto res = qppg_solve(T, SolverConfig{});
  CHECK(res.assignment.columns == std::vector<index_t>{0, 1, 2});
  CHECK(res.score == 1.0);
  CHECK(res.converged);
  CHECK(res.score == brute_force(T, ConstraintMode::row).score);
}

TEST_CASE("qppg never beats the enumeration oracle") {
  std::mt19937_64 rng(67);
  for (int rep = 0; rep < 25; ++rep) {
    const int m = 3 + static_cast<int>(rng() % 2);
    const auto T = hmtest::random_tensor(m, m, 6 * m * m, rng);
    const auto res = qppg_solve(T, SolverConfig{});
    const auto opt = brute_force(T, ConstraintMode::row);
    CHECK(res.score <= opt.score + 1e-12);
  }
}

TEST_CASE("qppg trace is deterministic and well formed") {
  std::mt19937_64 rng(71);
  const auto T = hmtest::random_tensor(4, 4, 60, rng);
  SolverConfig cfg;
  const auto a = qppg_solve(T, cfg);
  const auto b = qppg_solve(T, cfg);

  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t r = 0; r < a.trace.size(); ++r) {
    CHECK(a.trace[r].sigma == b.trace[r].sigma);
    CHECK(a.trace[r].h_sum == b.trace[r].h_sum);
    CHECK(a.trace[r].support_size == b.trace[r].support_size);
    CHECK(a.trace[r].theta == b.trace[r].theta);
    CHECK(a.trace[r].kkt_residual == b.trace[r].kkt_residual);
  }
  CHECK(a.assignment.columns == b.assignment.columns);
  CHECK(a.support_history == b.support_history);

  // sigma is non-decreasing and capped
  for (std::size_t r = 1; r < a.trace.size(); ++r) {
    CHECK(a.trace[r].sigma >= a.trace[r - 1].sigma);
    CHECK(a.trace[r].sigma <= cfg.sigma_max);
  }
  // the final iterate respects the box
  for (double v : a.final_x.entries) {
    CHECK(v >= 0.0);
    CHECK(v <= cfg.M);
  }
  CHECK(a.outer_iterations == static_cast<int>(a.trace.size()));
  CHECK(a.support_history.size() == a.trace.size());
}

TEST_CASE("qppg row_and_column mode needs a square instance") {
  const SparseAffinityTensor rect(2, 3);
  SolverConfig cfg;
  cfg.mode = ConstraintMode::row_and_column;
  CHECK_THROWS_AS(qppg_solve(rect, cfg), std::invalid_argument);
}

TEST_CASE("solver config parsing") {
  SECTION("file contents override defaults") {
    std::istringstream is("sigma0 = 5\nM = 100 # box bound\nmode = perm\ninner_steps = 3\n");
    const auto cfg = read_solver_config(is);
    CHECK(cfg.sigma0 == 5.0);
    CHECK(cfg.M == 100.0);
    CHECK(cfg.mode == ConstraintMode::row_and_column);
    CHECK(cfg.inner_steps == 3);
    CHECK(cfg.tol == 1e-5);  // untouched default
  }
  SECTION("unknown keys are rejected") {
    std::istringstream is("sigma_zero = 5\n");
    CHECK_THROWS_AS(read_solver_config(is), std::invalid_argument);
  }
  SECTION("malformed numbers are rejected") {
    std::istringstream is("sigma0 = fast\n");
    CHECK_THROWS_AS(read_solver_config(is), std::invalid_argument);
  }
  SECTION("invariant violations are rejected") {
    std::istringstream is("rho = 0.7\n");
    CHECK_THROWS_AS(read_solver_config(is), std::invalid_argument);
    std::istringstream is2("beta = 1.0\n");
    CHECK_THROWS_AS(read_solver_config(is2), std::invalid_argument);
    std::istringstream is3("M = 0.5\n");
    CHECK_THROWS_AS(read_solver_config(is3), std::invalid_argument);
  }
}
