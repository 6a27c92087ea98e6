#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypermatch/affinity.hpp"
#include "hypermatch/match_result.hpp"
#include "hypermatch/solver.hpp"

// Synthetic correspondence benchmark: the second point set is a similarity
// transform of the first plus Gaussian noise, padded with outlier points
// and shuffled; the shuffle is the ground-truth assignment.

namespace hypermatch {

struct SyntheticConfig {
  int n1 = 20;
  int n2 = 20;
  double noise_sigma = 0.0;  // per-coordinate Gaussian noise
  double rotation = 0.0;     // radians
  double scale = 1.0;
  std::uint64_t seed = 0;
  int trials = 1;

  void validate() const {
    if (n1 < 1) throw std::invalid_argument("synthetic config: need n1 >= 1");
    if (n1 > n2) throw std::invalid_argument("synthetic config: need n1 <= n2");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("synthetic config: need noise_sigma >= 0");
    if (!(scale > 0.0)) throw std::invalid_argument("synthetic config: need scale > 0");
  }
};

struct SyntheticInstance {
  PointSet v1;
  PointSet v2;
  std::vector<index_t> truth;  // truth[i] is the index of point i inside v2
};

namespace detail {

// splitmix64 finalizer; derives independent per-trial seeds
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Standard-normal base points, a rotated and scaled noisy copy, outlier
/// padding up to n2, and a seeded shuffle recorded as ground truth.
inline SyntheticInstance gen_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  SyntheticInstance inst;
  inst.v1.points.resize(static_cast<std::size_t>(cfg.n1));
  for (Point& p : inst.v1.points) {
    p.x = unit(rng);
    p.y = unit(rng);
  }

  const double cr = std::cos(cfg.rotation) * cfg.scale;
  const double sr = std::sin(cfg.rotation) * cfg.scale;
  std::vector<Point> raw(static_cast<std::size_t>(cfg.n2));
  for (int i = 0; i < cfg.n1; ++i) {
    const Point& p = inst.v1.points[static_cast<std::size_t>(i)];
    raw[static_cast<std::size_t>(i)] = {cr * p.x - sr * p.y + cfg.noise_sigma * unit(rng),
                                        sr * p.x + cr * p.y + cfg.noise_sigma * unit(rng)};
  }
  for (int i = cfg.n1; i < cfg.n2; ++i) raw[static_cast<std::size_t>(i)] = {unit(rng), unit(rng)};

  std::vector<index_t> dest(static_cast<std::size_t>(cfg.n2));
  std::iota(dest.begin(), dest.end(), 0);
  std::shuffle(dest.begin(), dest.end(), rng);

  inst.v2.points.resize(static_cast<std::size_t>(cfg.n2));
  for (int i = 0; i < cfg.n2; ++i)
    inst.v2.points[static_cast<std::size_t>(dest[static_cast<std::size_t>(i)])] = raw[static_cast<std::size_t>(i)];
  inst.truth.assign(dest.begin(), dest.begin() + cfg.n1);
  return inst;
}

/// Fraction of rows assigned to their ground-truth column.
inline double accuracy(const BinaryAssignment& pred, const std::vector<index_t>& truth) {
  if (pred.columns.size() != truth.size())
    throw std::invalid_argument("accuracy: prediction and truth lengths differ");
  if (truth.empty()) throw std::invalid_argument("accuracy: empty truth");
  int correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (pred.columns[i] == truth[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

// Ground-truth file: CSV "row,col".

inline void write_truth_csv(std::ostream& os, const std::vector<index_t>& truth) {
  os << "row,col\n";
  for (std::size_t i = 0; i < truth.size(); ++i) os << i << ',' << truth[i] << '\n';
}

inline std::vector<index_t> read_truth_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("truth csv: empty file");
  {
    const auto header = detail::split_csv_line(line);
    if (header != std::vector<std::string>{"row", "col"})
      throw std::runtime_error("truth csv: expected header 'row,col'");
  }
  std::vector<index_t> truth;
  long expected_row = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 2) throw std::runtime_error("truth csv: expected 2 fields per row");
    if (detail::parse_csv_int(fields[0], "row") != expected_row)
      throw std::runtime_error("truth csv: rows must be 0..n1-1 in order");
    truth.push_back(static_cast<index_t>(detail::parse_csv_int(fields[1], "col")));
    ++expected_row;
  }
  return truth;
}

inline void save_truth_csv(const std::filesystem::path& path, const std::vector<index_t>& truth) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  write_truth_csv(os, truth);
}

inline std::vector<index_t> load_truth_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open truth csv: " + path.string());
  return read_truth_csv(is);
}

/// Sweep over problem sizes, noise levels, neighbour counts and box bounds.
/// n2 pairs with n1 positionally; when empty it mirrors n1.
struct SweepConfig {
  std::vector<int> n1{20};
  std::vector<int> n2;
  std::vector<double> noise{0.0, 0.025, 0.05, 0.1};
  std::vector<int> s{100};
  std::vector<double> M{10000.0};
  int trials = 100;
  std::uint64_t seed = 0;
  double rotation = 0.0;
  double scale = 1.0;
  SolverConfig solver;

  void validate() const {
    if (n1.empty() || noise.empty() || s.empty() || M.empty())
      throw std::invalid_argument("sweep config: empty grid axis");
    if (!n2.empty() && n2.size() != n1.size())
      throw std::invalid_argument("sweep config: n2 list must pair with n1");
    if (trials < 1) throw std::invalid_argument("sweep config: need trials >= 1");
    solver.validate();
  }
};

struct ExperimentRow {
  int n1 = 0;
  int n2 = 0;
  double noise = 0.0;
  int s = 0;
  double M = 0.0;
  int trial = 0;  // -1 marks the per-grid-point mean row
  double accuracy = 0.0;
  double score = 0.0;
  double time_s = 0.0;
  double outer_iters = 0.0;
  double converged = 0.0;  // 0/1 on raw rows, fraction on mean rows
};

inline void write_experiment_csv(std::ostream& os, const std::vector<ExperimentRow>& rows) {
  os << "n1,n2,noise,s,M,trial,accuracy,score,time_s,outer_iters,converged\n";
  for (const ExperimentRow& r : rows) {
    os << r.n1 << ',' << r.n2 << ',' << detail::format_double(r.noise) << ',' << r.s << ','
       << detail::format_double(r.M) << ',' << r.trial << ',' << detail::format_double(r.accuracy)
       << ',' << detail::format_double(r.score) << ',' << detail::format_double(r.time_s) << ','
       << detail::format_double(r.outer_iters) << ',' << detail::format_double(r.converged) << '\n';
  }
}

/// One full sweep: every grid point runs `trials` seeded instances through
/// generation, tensor construction and the penalty solver. A failing trial
/// becomes a row with converged = 0 and the sweep continues. Each grid
/// point is followed by its mean row (trial = -1).
inline std::vector<ExperimentRow> run_experiment(const SweepConfig& sweep) {
  sweep.validate();
  std::vector<ExperimentRow> rows;
  std::uint64_t grid_index = 0;
  for (std::size_t size_i = 0; size_i < sweep.n1.size(); ++size_i) {
    const int n1 = sweep.n1[size_i];
    const int n2 = sweep.n2.empty() ? n1 : sweep.n2[size_i];
    for (double noise : sweep.noise)
      for (int s : sweep.s)
        for (double M : sweep.M) {
          ++grid_index;
          ExperimentRow mean{n1, n2, noise, s, M, -1, 0, 0, 0, 0, 0};
          for (int trial = 0; trial < sweep.trials; ++trial) {
            const std::uint64_t trial_seed = detail::mix_seed(sweep.seed, grid_index * 1000003ULL + static_cast<std::uint64_t>(trial));
            ExperimentRow row{n1, n2, noise, s, M, trial, 0, 0, 0, 0, 0};
            try {
              SyntheticConfig sc;
              sc.n1 = n1;
              sc.n2 = n2;
              sc.noise_sigma = noise;
              sc.rotation = sweep.rotation;
              sc.scale = sweep.scale;
              sc.seed = trial_seed;
              const SyntheticInstance inst = gen_synthetic(sc);
              const HyperedgeSet E1 =
                  sample_hyperedges(inst.v1, n1 * n2, detail::mix_seed(trial_seed, 1));
              const SparseAffinityTensor T = build_affinity(inst.v1, inst.v2, E1, s);
              SolverConfig cfg = sweep.solver;
              cfg.M = M;
              const MatchResult res = qppg_solve(T, cfg);
              row.accuracy = accuracy(res.assignment, inst.truth);
              row.score = res.score;
              row.time_s = res.wall_time_s;
              row.outer_iters = res.outer_iterations;
              row.converged = res.converged ? 1.0 : 0.0;
            } catch (const std::exception&) {
              row.converged = 0.0;
            }
            mean.accuracy += row.accuracy;
            mean.score += row.score;
            mean.time_s += row.time_s;
            mean.outer_iters += row.outer_iters;
            mean.converged += row.converged;
            rows.push_back(row);
          }
          const double inv = 1.0 / static_cast<double>(sweep.trials);
          mean.accuracy *= inv;
          mean.score *= inv;
          mean.time_s *= inv;
          mean.outer_iters *= inv;
          mean.converged *= inv;
          rows.push_back(mean);
        }
  }
  return rows;
}

/// Sweep file: flat "key = value" lines; list axes take comma-separated
/// values; "solver.<field>" keys feed the embedded solver config.
inline SweepConfig read_sweep_config(std::istream& is) {
  SweepConfig sweep;
  std::string line;
  int lineno = 0;
  const auto parse_list_d = [](const std::string& v, const char* what) {
    std::vector<double> out;
    for (const std::string& tok : detail::split_csv_line(v)) out.push_back(detail::parse_csv_double(detail::trim(tok), what));
    return out;
  };
  const auto parse_list_i = [](const std::string& v, const char* what) {
    std::vector<int> out;
    for (const std::string& tok : detail::split_csv_line(v)) out.push_back(static_cast<int>(detail::parse_csv_int(detail::trim(tok), what)));
    return out;
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("sweep config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "n1") sweep.n1 = parse_list_i(value, "n1");
    else if (key == "n2") sweep.n2 = parse_list_i(value, "n2");
    else if (key == "noise") sweep.noise = parse_list_d(value, "noise");
    else if (key == "s") sweep.s = parse_list_i(value, "s");
    else if (key == "M") sweep.M = parse_list_d(value, "M");
    else if (key == "trials") sweep.trials = static_cast<int>(detail::parse_csv_int(value, "trials"));
    else if (key == "seed") sweep.seed = static_cast<std::uint64_t>(detail::parse_csv_int(value, "seed"));
    else if (key == "rotation") sweep.rotation = detail::parse_csv_double(value, "rotation");
    else if (key == "scale") sweep.scale = detail::parse_csv_double(value, "scale");
    else if (key.rfind("solver.", 0) == 0) apply_config_entry(sweep.solver, key.substr(7), value);
    else throw std::invalid_argument("sweep config: unknown key '" + key + "'");
  }
  sweep.validate();
  return sweep;
}

inline SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open sweep config: " + path.string());
  return read_sweep_config(is);
}

}  // namespace hypermatch
