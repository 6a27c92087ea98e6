// Command-line driver: synthetic data generation, tensor construction,
// penalty solves, brute-force verification, benchmark sweeps and iterate
// diagnostics. Stages communicate through files only, so each step can be
// cached and inspected.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hypermatch/affinity.hpp"
#include "hypermatch/bench.hpp"
#include "hypermatch/oracle.hpp"
#include "hypermatch/result_json.hpp"
#include "hypermatch/rounding.hpp"
#include "hypermatch/solver.hpp"
#include "hypermatch/tensor.hpp"

namespace fs = std::filesystem;
using namespace hypermatch;

namespace {

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_iterate_file(const fs::path& path, const AssignmentVector& x) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  for (double v : x.entries) os << detail::format_double(v) << '\n';
}

AssignmentVector read_iterate_file(const fs::path& path, int n1, int n2) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open iterate file: " + path.string());
  std::vector<double> values;
  double v = 0.0;
  while (is >> v) values.push_back(v);
  if (!is.eof()) throw std::runtime_error("iterate file: malformed number in " + path.string());
  if (static_cast<int>(values.size()) != n1 * n2)
    throw std::runtime_error("iterate file: expected " + std::to_string(n1 * n2) + " values, got " +
                             std::to_string(values.size()));
  return AssignmentVector{n1, n2, std::move(values)};
}

struct GenArgs {
  int n1 = 20;
  int n2 = 20;
  double noise = 0.0;
  double rotation = 0.0;
  double scale = 1.0;
  std::uint64_t seed = 0;
  std::string out_prefix;
};

void run_gen(const GenArgs& a) {
  SyntheticConfig cfg;
  cfg.n1 = a.n1;
  cfg.n2 = a.n2;
  cfg.noise_sigma = a.noise;
  cfg.rotation = a.rotation;
  cfg.scale = a.scale;
  cfg.seed = a.seed;
  const SyntheticInstance inst = gen_synthetic(cfg);
  save_points_csv(a.out_prefix + "V1.csv", inst.v1);
  save_points_csv(a.out_prefix + "V2.csv", inst.v2);
  save_truth_csv(a.out_prefix + "truth.csv", inst.truth);
}

struct TensorizeArgs {
  std::string v1, v2, out;
  std::string edges_in, edges_out;
  int s = 100;
  std::uint64_t seed = 0;
};

void run_tensorize(const TensorizeArgs& a) {
  const PointSet V1 = load_points_csv(a.v1);
  const PointSet V2 = load_points_csv(a.v2);
  HyperedgeSet E1;
  if (!a.edges_in.empty()) E1 = load_hyperedges_csv(a.edges_in);
  else E1 = sample_hyperedges(V1, V1.size() * V2.size(), a.seed);
  if (!a.edges_out.empty()) save_hyperedges_csv(a.edges_out, E1);
  save_tensor(a.out, build_affinity(V1, V2, E1, a.s));
}

struct SolveArgs {
  std::string tensor, mode = "row", config, truth, out, trace, x_out;
  std::optional<double> sigma0, sigma_max, growth_fast, growth_slow, violation_threshold;
  std::optional<double> M, tol, rho, eps, beta, support_tau;
  std::optional<int> window, inner_steps, max_outer;
};

void run_solve(const SolveArgs& a) {
  const SparseAffinityTensor T = load_tensor(a.tensor);
  SolverConfig cfg;
  if (!a.config.empty()) cfg = load_solver_config(a.config);
  cfg.mode = parse_constraint_mode(a.mode);
  if (a.sigma0) cfg.sigma0 = *a.sigma0;
  if (a.sigma_max) cfg.sigma_max = *a.sigma_max;
  if (a.growth_fast) cfg.growth_fast = *a.growth_fast;
  if (a.growth_slow) cfg.growth_slow = *a.growth_slow;
  if (a.violation_threshold) cfg.violation_threshold = *a.violation_threshold;
  if (a.M) cfg.M = *a.M;
  if (a.tol) cfg.tol = *a.tol;
  if (a.rho) cfg.rho = *a.rho;
  if (a.eps) cfg.eps = *a.eps;
  if (a.beta) cfg.beta = *a.beta;
  if (a.support_tau) cfg.support_tau = *a.support_tau;
  if (a.window) cfg.window = *a.window;
  if (a.inner_steps) cfg.inner_steps = *a.inner_steps;
  if (a.max_outer) cfg.max_outer = *a.max_outer;
  cfg.validate();

  MatchResult res = qppg_solve(T, cfg);
  if (!a.truth.empty()) res.accuracy = accuracy(res.assignment, load_truth_csv(a.truth));

  write_text_file(a.out, result_json_string(res));

  fs::path trace_path = a.trace.empty() ? fs::path(a.out).replace_extension(".trace.csv") : fs::path(a.trace);
  std::ofstream trace_os(trace_path);
  if (!trace_os) throw std::runtime_error("cannot open for writing: " + trace_path.string());
  write_trace_csv(trace_os, res.trace);

  if (!a.x_out.empty()) write_iterate_file(a.x_out, res.final_x);
}

struct OracleArgs {
  std::string tensor, mode = "row", out;
};

void run_oracle(const OracleArgs& a) {
  const SparseAffinityTensor T = load_tensor(a.tensor);
  const BruteForceResult r = brute_force(T, parse_constraint_mode(a.mode));
  nlohmann::json doc;
  doc["assignment"] = r.assignment.columns;
  doc["score"] = r.score;
  const std::string text = doc.dump(2) + "\n";
  if (a.out.empty()) std::cout << text;
  else write_text_file(a.out, text);
}

struct BenchArgs {
  std::string sweep_config, out;
};

void run_bench(const BenchArgs& a) {
  const SweepConfig sweep = load_sweep_config(a.sweep_config);
  const auto rows = run_experiment(sweep);
  std::ofstream os(a.out);
  if (!os) throw std::runtime_error("cannot open for writing: " + a.out);
  write_experiment_csv(os, rows);
}

struct CheckArgs {
  std::string tensor, x, mode = "row", out;
  double sigma = 10.0;
  double M = 10000.0;
  double support_tau = 1e-8;
};

void run_check(const CheckArgs& a) {
  const SparseAffinityTensor T = load_tensor(a.tensor);
  const AssignmentVector x = read_iterate_file(a.x, T.n1(), T.n2());
  const ConstraintMode mode = parse_constraint_mode(a.mode);
  const StationarityReport rep = check_stationarity_lemmas(T, x, a.sigma, a.M, mode);
  const Violations v = violations(x, mode);

  nlohmann::json doc;
  doc["kkt_residual"] = rep.kkt;
  doc["tolerance"] = rep.tolerance;
  doc["h"] = v.row;
  if (!v.col.empty()) doc["h_col"] = v.col;
  std::vector<double> upper;
  for (const auto& b : rep.blocks) upper.push_back(b.upper);
  doc["upper_bounds"] = upper;
  doc["support_size"] = support_size(x, a.support_tau);
  doc["lemma_pass"] = rep.pass;
  const std::string text = doc.dump(2) + "\n";
  if (a.out.empty()) std::cout << text;
  else write_text_file(a.out, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypergraph matching: sparse affinity tensors + quadratic penalty solver"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic point-set instance");
  gen_cmd->add_option("--n1", gen.n1, "points in the first set")->required();
  gen_cmd->add_option("--n2", gen.n2, "points in the second set (>= n1)")->required();
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise sigma");
  gen_cmd->add_option("--rotation", gen.rotation, "rotation angle in radians");
  gen_cmd->add_option("--scale", gen.scale, "uniform scale factor");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--out-prefix", gen.out_prefix, "prefix for V1.csv, V2.csv, truth.csv")->required();

  TensorizeArgs tz;
  auto* tz_cmd = app.add_subcommand("tensorize", "build the affinity tensor from two point sets");
  tz_cmd->add_option("--v1", tz.v1, "first point-set CSV")->required();
  tz_cmd->add_option("--v2", tz.v2, "second point-set CSV")->required();
  tz_cmd->add_option("--s", tz.s, "nearest neighbours per hyperedge");
  tz_cmd->add_option("--seed", tz.seed, "hyperedge sampling seed");
  tz_cmd->add_option("--edges-in", tz.edges_in, "use these hyperedges instead of sampling");
  tz_cmd->add_option("--edges-out", tz.edges_out, "write the sampled hyperedges here");
  tz_cmd->add_option("--out", tz.out, "output tensor file")->required();

  SolveArgs so;
  auto* so_cmd = app.add_subcommand("solve", "run the penalty solver on a tensor");
  so_cmd->add_option("--tensor", so.tensor, "input tensor file")->required();
  so_cmd->add_option("--mode", so.mode, "constraints: row | perm");
  so_cmd->add_option("--config", so.config, "solver config file (key = value)");
  so_cmd->add_option("--truth", so.truth, "ground-truth CSV for accuracy");
  so_cmd->add_option("--out", so.out, "result JSON file")->required();
  so_cmd->add_option("--trace", so.trace, "trace CSV file (default: <out>.trace.csv)");
  so_cmd->add_option("--x-out", so.x_out, "write the final continuous iterate here");
  so_cmd->add_option("--sigma0", so.sigma0, "initial penalty weight");
  so_cmd->add_option("--sigma-max", so.sigma_max, "penalty weight cap");
  so_cmd->add_option("--growth-fast", so.growth_fast, "penalty growth above the threshold");
  so_cmd->add_option("--growth-slow", so.growth_slow, "penalty growth at a running max");
  so_cmd->add_option("--violation-threshold", so.violation_threshold, "fast-growth threshold");
  so_cmd->add_option("--window", so.window, "violation window length");
  so_cmd->add_option("--M", so.M, "box upper bound");
  so_cmd->add_option("--tol", so.tol, "inner residual tolerance");
  so_cmd->add_option("--rho", so.rho, "Armijo parameter");
  so_cmd->add_option("--eps", so.eps, "active-set band width");
  so_cmd->add_option("--beta", so.beta, "backtracking factor");
  so_cmd->add_option("--inner-steps", so.inner_steps, "projected-gradient steps per outer iteration");
  so_cmd->add_option("--max-outer", so.max_outer, "outer iteration cap");
  so_cmd->add_option("--support-tau", so.support_tau, "support counting threshold");

  OracleArgs orc;
  auto* orc_cmd = app.add_subcommand("oracle", "brute-force the optimal assignment (small instances)");
  orc_cmd->add_option("--tensor", orc.tensor, "input tensor file")->required();
  orc_cmd->add_option("--mode", orc.mode, "constraints: row | perm");
  orc_cmd->add_option("--out", orc.out, "output JSON (stdout when omitted)");

  BenchArgs be;
  auto* be_cmd = app.add_subcommand("bench", "run a synthetic benchmark sweep");
  be_cmd->add_option("--sweep-config", be.sweep_config, "sweep config file")->required();
  be_cmd->add_option("--out", be.out, "output CSV file")->required();

  CheckArgs ck;
  auto* ck_cmd = app.add_subcommand("check", "diagnostics for a stored iterate");
  ck_cmd->add_option("--tensor", ck.tensor, "input tensor file")->required();
  ck_cmd->add_option("--x", ck.x, "iterate file, one value per line")->required();
  ck_cmd->add_option("--sigma", ck.sigma, "penalty weight for the report");
  ck_cmd->add_option("--M", ck.M, "box upper bound");
  ck_cmd->add_option("--mode", ck.mode, "constraints: row | perm");
  ck_cmd->add_option("--support-tau", ck.support_tau, "support counting threshold");
  ck_cmd->add_option("--out", ck.out, "output JSON (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) run_gen(gen);
    else if (tz_cmd->parsed()) run_tensorize(tz);
    else if (so_cmd->parsed()) run_solve(so);
    else if (orc_cmd->parsed()) run_oracle(orc);
    else if (be_cmd->parsed()) run_bench(be);
    else if (ck_cmd->parsed()) run_check(ck);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
