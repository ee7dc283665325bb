#pragma once

#include <Eigen/Dense>

namespace pertlab {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// maximize c.x subject to A x = b, x >= 0.
///
/// Dense two-phase tableau simplex with Bland's rule; intended for the small
/// programs arising in rate synthesis (tens of variables). Rows of A should
/// be linearly independent; redundant rows are tolerated but leave an
/// artificial basic at zero, which is then pivoted out or its row dropped.
LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                  double tol = 1e-10);

}  // namespace pertlab
