#pragma once

#include <string>

#include <json.hpp>

#include "hypermatch/match_result.hpp"

namespace hypermatch {

/// Result document for one solve. Keys are emitted in sorted order and the
/// timing field is deliberately excluded so identical runs serialize to
/// identical bytes.
inline nlohmann::json result_to_json(const MatchResult& res) {
  nlohmann::json doc;
  doc["assignment"] = res.assignment.columns;
  doc["score"] = res.score;
  if (res.accuracy) doc["accuracy"] = *res.accuracy;
  doc["iterations"] = res.outer_iterations;
  doc["support_history"] = res.support_history;
  doc["converged"] = res.converged;
  return doc;
}

inline std::string result_json_string(const MatchResult& res) {
  return result_to_json(res).dump(2) + "\n";
}

}  // namespace hypermatch
