#include <catch_amalgamated.hpp>

#include <random>

#include "hypermatch/oracle.hpp"
#include "test_helpers.hpp"

using namespace hypermatch;

TEST_CASE("brute force finds the only scoring assignment") {
  const auto T = SparseAffinityTensor::from_triples(3, 3, {{0, 4, 8, 1.0}});
  const auto r = brute_force(T, ConstraintMode::row);
  CHECK(r.assignment.columns == std::vector<index_t>{0, 1, 2});
  CHECK(r.score == 1.0);

  const auto rp = brute_force(T, ConstraintMode::row_and_column);
  CHECK(rp.assignment.columns == std::vector<index_t>{0, 1, 2});
  CHECK(rp.score == 1.0);
}

TEST_CASE("brute force tie-breaks to the lexicographically smallest columns") {
  const SparseAffinityTensor empty(3, 3);
  CHECK(brute_force(empty, ConstraintMode::row).assignment.columns ==
        std::vector<index_t>{0, 0, 0});
  CHECK(brute_force(empty, ConstraintMode::row_and_column).assignment.columns ==
        std::vector<index_t>{0, 1, 2});
}

TEST_CASE("two blocks cannot score: any valid tensor there is empty") {
  // a stored triple needs three distinct blocks
  CHECK_THROWS_AS(SparseAffinityTensor::from_triples(2, 2, {{0, 1, 3, 1.0}}),
                  std::invalid_argument);
  const SparseAffinityTensor empty(2, 2);
  CHECK(brute_force(empty, ConstraintMode::row).score == 0.0);
}

TEST_CASE("brute force refuses oversized instances") {
  const SparseAffinityTensor big_row(10, 10);
  CHECK_THROWS_AS(brute_force(big_row, ConstraintMode::row), std::invalid_argument);
  const SparseAffinityTensor big_perm(10, 10);
  CHECK_THROWS_AS(brute_force(big_perm, ConstraintMode::row_and_column), std::invalid_argument);
  const SparseAffinityTensor rect(3, 4);
  CHECK_THROWS_AS(brute_force(rect, ConstraintMode::row_and_column), std::invalid_argument);
}

TEST_CASE("permutation optimum never beats the row optimum") {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 20; ++rep) {
    const auto T = hmtest::random_tensor(4, 4, 40, rng);
    CHECK(brute_force(T, ConstraintMode::row_and_column).score <=
          brute_force(T, ConstraintMode::row).score + 1e-12);
  }
}

TEST_CASE("finite differences of simple objectives") {
  SECTION("constant objective") {
    const auto g = fd_gradient([](const std::vector<double>&) { return 4.2; },
                               std::vector<double>(6, 0.3), 1e-5);
    for (double v : g) CHECK(v == 0.0);
  }
  SECTION("linear objective recovers its coefficients") {
    const std::vector<double> c = {1.0, -2.0, 0.5, 3.25};
    const auto g = fd_gradient(
        [&](const std::vector<double>& v) {
          double s = 0.0;
          for (std::size_t i = 0; i < v.size(); ++i) s += c[i] * v[i];
          return s;
        },
        std::vector<double>(4, 0.7), 1e-5);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(g[i] - c[i]) <= 1e-9);
  }
  SECTION("nonpositive step is rejected") {
    CHECK_THROWS_AS(fd_gradient([](const std::vector<double>&) { return 0.0; },
                                std::vector<double>(2, 0.0), 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("full expansion on explicit inputs") {
  const auto T = SparseAffinityTensor::from_triples(3, 3, {{0, 3, 6, 2.0}});
  CHECK(full_expand_objective(T, AssignmentVector::ones(3, 3)) == -2.0);
  CHECK(full_expand_objective(T, AssignmentVector::zeros(3, 3)) == 0.0);
}

TEST_CASE("full expansion is guarded against large instances") {
  const SparseAffinityTensor big(3, 100);
  CHECK_THROWS_AS(full_expand_objective(big, AssignmentVector::zeros(3, 100)),
                  std::invalid_argument);
}
