#include "pertlab/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace pertlab {

namespace {

class Tableau {
 public:
  // rows 0..m-1 constraints, last row objective (reduced costs, to be
  // driven non-negative for maximisation of the stored objective).
  Tableau(int m, int cols) : t_(Eigen::MatrixXd::Zero(m + 1, cols + 1)), basis_(static_cast<std::size_t>(m)) {}

  Eigen::MatrixXd& t() { return t_; }
  std::vector<int>& basis() { return basis_; }
  int rows() const { return static_cast<int>(t_.rows()) - 1; }
  int cols() const { return static_cast<int>(t_.cols()) - 1; }
  double rhs(int r) const { return t_(r, cols()); }

  void pivot(int r, int c) {
    t_.row(r) /= t_(r, c);
    for (int i = 0; i <= rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  // Bland's rule; columns >= allowed_cols are never entered.
  bool optimize(int allowed_cols, double tol) {
    for (int iter = 0; iter < 100000; ++iter) {
      int enter = -1;
      for (int c = 0; c < allowed_cols; ++c) {
        if (t_(rows(), c) < -tol) {
          enter = c;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < rows(); ++r) {
        const double a = t_(r, enter);
        if (a > tol) {
          const double ratio = rhs(r) / a;
          if (ratio < best - tol ||
              (ratio <= best + tol && leave >= 0 && basis_[static_cast<std::size_t>(r)] < basis_[static_cast<std::size_t>(leave)])) {
            best = ratio;
            leave = r;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    return false;
  }

 private:
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
};

}  // namespace

LpResult solve_lp(const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in,
                  const Eigen::VectorXd& c, double tol) {
  const int m = static_cast<int>(A_in.rows());
  const int n = static_cast<int>(A_in.cols());
  Eigen::MatrixXd A = A_in;
  Eigen::VectorXd b = b_in;
  for (int r = 0; r < m; ++r) {
    if (b(r) < 0) {
      A.row(r) *= -1.0;
      b(r) *= -1.0;
    }
  }

  // Phase 1: columns [x (n) | artificials (m)].
  Tableau tab(m, n + m);
  auto& t = tab.t();
  t.block(0, 0, m, n) = A;
  t.block(0, n, m, m) = Eigen::MatrixXd::Identity(m, m);
  t.col(n + m).head(m) = b;
  for (int r = 0; r < m; ++r) tab.basis()[static_cast<std::size_t>(r)] = n + r;
  // minimise sum of artificials == maximise -sum; reduced costs = -(sum of rows).
  for (int r = 0; r < m; ++r) t.row(m) -= t.row(r);
  t.block(m, n, 1, m).setZero();

  LpResult result;
  tab.optimize(n + m, tol);
  if (-t(m, n + m) > 1e3 * tol * (1.0 + b.lpNorm<Eigen::Infinity>())) {
    result.status = LpStatus::infeasible;
    return result;
  }

  // Drive artificials out of the basis; drop redundant rows.
  std::vector<int> keep;
  for (int r = 0; r < m; ++r) {
    if (tab.basis()[static_cast<std::size_t>(r)] >= n) {
      int col = -1;
      for (int j = 0; j < n; ++j) {
        if (std::abs(t(r, j)) > tol) {
          col = j;
          break;
        }
      }
      if (col >= 0) {
        tab.pivot(r, col);
        keep.push_back(r);
      }
    } else {
      keep.push_back(r);
    }
  }

  // Phase 2 on the kept rows, x columns only.
  const int m2 = static_cast<int>(keep.size());
  Tableau tab2(m2, n);
  auto& t2 = tab2.t();
  for (int i = 0; i < m2; ++i) {
    const int r = keep[static_cast<std::size_t>(i)];
    t2.block(i, 0, 1, n) = t.block(r, 0, 1, n);
    t2(i, n) = t(r, n + m);
    tab2.basis()[static_cast<std::size_t>(i)] = tab.basis()[static_cast<std::size_t>(r)];
  }
  t2.block(m2, 0, 1, n) = -c.transpose();
  for (int i = 0; i < m2; ++i) {
    const int bc = tab2.basis()[static_cast<std::size_t>(i)];
    const double f = t2(m2, bc);
    if (f != 0.0) t2.row(m2) -= f * t2.row(i);
  }
  if (!tab2.optimize(n, tol)) {
    result.status = LpStatus::unbounded;
    return result;
  }

  result.status = LpStatus::optimal;
  result.x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m2; ++i) result.x(tab2.basis()[static_cast<std::size_t>(i)]) = std::max(0.0, t2(i, n));
  result.objective = c.dot(result.x);
  return result;
}

}  // namespace pertlab
