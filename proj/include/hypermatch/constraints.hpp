#pragma once

#include <stdexcept>
#include <string>

namespace hypermatch {

/// Feasible set of the matching problem: one selected column per row, or a
/// full permutation (rows and columns both sum to one; requires n1 == n2).
enum class ConstraintMode { row, row_and_column };

inline std::string to_string(ConstraintMode mode) {
  return mode == ConstraintMode::row ? "row" : "row_and_column";
}

inline ConstraintMode parse_constraint_mode(const std::string& s) {
  if (s == "row") return ConstraintMode::row;
  if (s == "row_and_column" || s == "perm") return ConstraintMode::row_and_column;
  throw std::invalid_argument("unknown constraint mode: '" + s + "' (expected row, row_and_column or perm)");
}

}  // namespace hypermatch
