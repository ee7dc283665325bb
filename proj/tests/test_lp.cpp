#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "pertlab/errors.hpp"
#include "pertlab/lp.hpp"
#include "pertlab/model.hpp"

using namespace pertlab;

TEST_SUITE("lp") {
  TEST_CASE("textbook optimum") {
    // max x + y, x + 2y <= 4, 3x + y <= 6  ->  (1.6, 1.2)
    Eigen::MatrixXd A(2, 4);
    A << 1, 2, 1, 0, 3, 1, 0, 1;
    const Eigen::VectorXd b = Eigen::Vector2d(4, 6);
    Eigen::VectorXd c(4);
    c << 1, 1, 0, 0;
    const LpResult r = solve_lp(A, b, c);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.x(0) == doctest::Approx(1.6));
    CHECK(r.x(1) == doctest::Approx(1.2));
    CHECK(r.objective == doctest::Approx(2.8));
  }

  TEST_CASE("infeasible and unbounded programs") {
    Eigen::MatrixXd A(1, 2);
    A << 1, 1;
    CHECK(solve_lp(A, Eigen::VectorXd::Constant(1, -1.0), Eigen::Vector2d(1, 0)).status == LpStatus::infeasible);
    A << 1, -1;
    CHECK(solve_lp(A, Eigen::VectorXd::Zero(1), Eigen::Vector2d(1, 0)).status == LpStatus::unbounded);
  }

  TEST_CASE("redundant rows are tolerated") {
    Eigen::MatrixXd A(3, 3);
    A << 1, 1, 1, 2, 2, 2, 1, 0, 0;
    const Eigen::VectorXd b = Eigen::Vector3d(1, 2, 0.25);
    const LpResult r = solve_lp(A, b, Eigen::Vector3d(0, 1, 0));
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.objective == doctest::Approx(0.75));
  }

  TEST_CASE("Beale's cycling example terminates under Bland's rule") {
    // max 0.75x4 - 20x5 + 0.5x6 - 6x7 with the classic degenerate rows.
    Eigen::MatrixXd A(3, 7);
    A << 1, 0, 0, 0.25, -8, -1, 9,
         0, 1, 0, 0.5, -12, -0.5, 3,
         0, 0, 1, 0, 0, 1, 0;
    Eigen::VectorXd c(7);
    c << 0, 0, 0, 0.75, -20, 0.5, -6;
    const LpResult r = solve_lp(A, Eigen::Vector3d(0, 0, 1), c);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.objective == doctest::Approx(1.25));
  }

  TEST_CASE("synthesis produces cyclic-balanced rates") {
    const SynthesisProblem p = load_synthesis_problem(testing::model_path("coupled_support.model"));
    for (SynthesisObjective obj : {SynthesisObjective::none, SynthesisObjective::max_min_rate}) {
      const auto rates = synthesize_rates(p, obj);
      const ModelSpec spec = ModelSpec::create(p.labels, p.zeta, p.eta, p.base_measure, rates);
      CHECK(max_cyclic_residual(spec) <= 1e-10);
      double top = 0.0, low = 1e300;
      for (const auto& t : rates) {
        top = std::max(top, t.rate);
        low = std::min(low, t.rate);
      }
      CHECK(top == doctest::Approx(1.0));
      if (obj == SynthesisObjective::max_min_rate) CHECK(low == doctest::Approx(0.5));
    }
  }

  TEST_CASE("synthesis reports infeasible supports") {
    SynthesisProblem p = load_synthesis_problem(testing::model_path("coupled_support.model"));
    p.support = {{3, 0, 0, 3}};  // only the joint move: Q(11,00) cannot be balanced
    CHECK_THROWS_AS(synthesize_rates(p, SynthesisObjective::none), InfeasibleError);
    p.support = {{2, 0, 0, 0}};
    CHECK_THROWS_AS(synthesize_rates(p, SynthesisObjective::none), InvariantError);
  }
}
