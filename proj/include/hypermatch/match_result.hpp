#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "hypermatch/rounding.hpp"
#include "hypermatch/tensor.hpp"

namespace hypermatch {

/// One row of the outer-iteration trace. sigma is the penalty weight the
/// iterate was solved with; the remaining columns describe the new iterate.
struct TraceRow {
  int outer_iter = 0;
  double sigma = 0.0;
  double h_sum = 0.0;
  int support_size = 0;
  double theta = 0.0;
  double kkt_residual = 0.0;
};

struct MatchResult {
  BinaryAssignment assignment;
  double score = 0.0;
  std::optional<double> accuracy;  // set only when ground truth is known
  int outer_iterations = 0;
  double wall_time_s = 0.0;
  std::vector<int> support_history;
  bool converged = false;
  std::vector<TraceRow> trace;
  AssignmentVector final_x;  // continuous iterate before rounding
};

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "outer_iter,sigma,h_sum,support_size,theta,kkt_residual\n";
  for (const TraceRow& r : trace) {
    os << r.outer_iter << ',' << detail::format_double(r.sigma) << ','
       << detail::format_double(r.h_sum) << ',' << r.support_size << ','
       << detail::format_double(r.theta) << ',' << detail::format_double(r.kkt_residual) << '\n';
  }
}

}  // namespace hypermatch
