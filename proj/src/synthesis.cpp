#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Dense>

#include "pertlab/errors.hpp"
#include "pertlab/lp.hpp"
#include "pertlab/model.hpp"

namespace pertlab {

namespace {

// Rows: one per ordered state triple; columns: support entries. Row (a,b,c)
// holds the coefficient of each rate in Q(a,b) + Q(b,c) + Q(c,a).
Eigen::MatrixXd cyclic_constraints(const SynthesisProblem& p) {
  const std::size_t k = p.labels.size();
  const auto m = static_cast<Eigen::Index>(p.support.size());
  std::vector<Eigen::RowVectorXd> q(k * k, Eigen::RowVectorXd::Zero(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const SupportEntry& e = p.support[static_cast<std::size_t>(i)];
    const auto pr = [&](int s) { return p.base_measure[static_cast<std::size_t>(s)]; };
    q[static_cast<std::size_t>(e.to_left) * k + static_cast<std::size_t>(e.to_right)](i) +=
        pr(e.from_left) * pr(e.from_right) / (pr(e.to_left) * pr(e.to_right));
    q[static_cast<std::size_t>(e.from_left) * k + static_cast<std::size_t>(e.from_right)](i) -= 1.0;
  }
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(k * k * k), m);
  Eigen::Index r = 0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t c = 0; c < k; ++c) rows.row(r++) = q[a * k + b] + q[b * k + c] + q[c * k + a];
  return rows;
}

// Orthonormal basis of the row space, as rows.
Eigen::MatrixXd row_space_basis(const Eigen::MatrixXd& A) {
  if (A.cols() == 0) return Eigen::MatrixXd(0, 0);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.transpose());
  qr.setThreshold(1e-12);
  const Eigen::Index rank = qr.rank();
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(A.cols(), rank);
  return Q.transpose();
}

}  // namespace

std::vector<Transition> synthesize_rates(const SynthesisProblem& p, SynthesisObjective objective) {
  const std::size_t k = p.labels.size();
  if (p.zeta.size() != k || p.eta.size() != k || p.base_measure.size() != k)
    throw InvariantError("states", "per-state vectors must match the state list");
  std::set<std::array<int, 4>> seen;
  for (const SupportEntry& e : p.support) {
    for (int s : {e.from_left, e.from_right, e.to_left, e.to_right})
      if (s < 0 || static_cast<std::size_t>(s) >= k) throw InvariantError("support", "state index out of range");
    const auto z = [&](int s) { return p.zeta[static_cast<std::size_t>(s)]; };
    const auto h = [&](int s) { return p.eta[static_cast<std::size_t>(s)]; };
    if (z(e.from_left) + z(e.from_right) != z(e.to_left) + z(e.to_right) ||
        h(e.from_left) + h(e.from_right) != h(e.to_left) + h(e.to_right))
      throw InvariantError("support", "entry does not conserve zeta and eta");
    if (e.from_left == e.to_left && e.from_right == e.to_right)
      throw InvariantError("support", "entry maps a pair to itself");
    if (!seen.insert({e.from_left, e.from_right, e.to_left, e.to_right}).second)
      throw InvariantError("support", "duplicate support entry");
  }
  if (p.support.empty()) throw InfeasibleError("empty support admits only the zero model");

  const auto m = static_cast<Eigen::Index>(p.support.size());
  const Eigen::MatrixXd basis = row_space_basis(cyclic_constraints(p));
  const Eigen::Index rank = basis.rows();

  Eigen::VectorXd rates;
  if (objective == SynthesisObjective::none) {
    Eigen::MatrixXd A(rank + 1, m);
    A.topRows(rank) = basis;
    A.row(rank).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rank + 1);
    b(rank) = 1.0;
    const LpResult res = solve_lp(A, b, Eigen::VectorXd::Zero(m));
    if (res.status != LpStatus::optimal) throw InfeasibleError("support admits only the zero model");
    rates = res.x;
  } else {
    // r = t*1 + s with t, s >= 0; maximise t.
    Eigen::MatrixXd A(rank + 1, m + 1);
    A.block(0, 0, rank, 1) = basis.rowwise().sum();
    A.block(0, 1, rank, m) = basis;
    A(rank, 0) = static_cast<double>(m);
    A.block(rank, 1, 1, m).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rank + 1);
    b(rank) = 1.0;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(m + 1);
    c(0) = 1.0;
    const LpResult res = solve_lp(A, b, c);
    if (res.status != LpStatus::optimal) throw InfeasibleError("support admits only the zero model");
    rates = Eigen::VectorXd::Constant(m, res.x(0)) + res.x.tail(m);
  }

  const double top = rates.maxCoeff();
  if (!(top > 1e-12)) throw InfeasibleError("support admits only the zero model");
  std::vector<Transition> out;
  out.reserve(p.support.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    // Round away simplex noise; the cyclic check below guards the result.
    double r = std::round(rates(i) / top * 1e12) / 1e12;
    if (r < 1e-12) r = 0.0;
    const SupportEntry& e = p.support[static_cast<std::size_t>(i)];
    out.push_back({e.from_left, e.from_right, e.to_left, e.to_right, r});
  }

  const ModelSpec check = ModelSpec::create(p.labels, p.zeta, p.eta, p.base_measure, out);
  if (max_cyclic_residual(check) > 1e-10)
    throw NumericalError("synthesized rates fail the cyclic Q check");
  return out;
}

}  // namespace pertlab
