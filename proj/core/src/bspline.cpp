#include "brady/bspline.hpp"

#include <algorithm>
#include <cmath>

#include "brady/errors.hpp"

namespace brady {

BSplineBasis::BSplineBasis(double lo, double hi, int n_basis, int degree)
    : lo_(lo), hi_(hi), n_basis_(n_basis), degree_(degree) {
  if (degree < 0 || n_basis <= degree) throw InvalidConfig("need n_basis > degree >= 0");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidConfig("B-spline range must satisfy lo < hi");
  }
  const int intervals = n_basis - degree;
  step_ = (hi - lo) / intervals;
  knots_.resize(static_cast<std::size_t>(n_basis + degree + 1));
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    knots_[i] = lo + (static_cast<double>(i) - degree) * step_;
  }
}

// Cox-de Boor recursion over the `degree + 1` functions that are nonzero on
// the knot span containing x.
Eigen::RowVectorXd BSplineBasis::eval(double x) const {
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(n_basis_);
  x = std::clamp(x, lo_, hi_);
  const int intervals = n_basis_ - degree_;
  const int span = std::min(static_cast<int>(std::floor((x - lo_) / step_)), intervals - 1) + degree_;
  std::vector<double> n(static_cast<std::size_t>(degree_ + 1), 0.0);
  std::vector<double> left(static_cast<std::size_t>(degree_ + 1), 0.0);
  std::vector<double> right(static_cast<std::size_t>(degree_ + 1), 0.0);
  n[0] = 1.0;
  for (int j = 1; j <= degree_; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    left[ju] = x - knots_[static_cast<std::size_t>(span + 1 - j)];
    right[ju] = knots_[static_cast<std::size_t>(span + j)] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const auto ru = static_cast<std::size_t>(r);
      const double temp = n[ru] / (right[ru + 1] + left[ju - ru]);
      n[ru] = saved + right[ru + 1] * temp;
      saved = left[ju - ru] * temp;
    }
    n[ju] = saved;
  }
  for (int j = 0; j <= degree_; ++j) out(span - degree_ + j) = n[static_cast<std::size_t>(j)];
  return out;
}

Eigen::MatrixXd BSplineBasis::design(std::span<const double> x) const {
  Eigen::MatrixXd b(static_cast<Eigen::Index>(x.size()), n_basis_);
  for (std::size_t i = 0; i < x.size(); ++i) b.row(static_cast<Eigen::Index>(i)) = eval(x[i]);
  return b;
}

Eigen::MatrixXd difference_penalty(int n, int order) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(n, n);
  for (int k = 0; k < order; ++k) {
    const Eigen::Index rows = d.rows() - 1;
    d = (d.bottomRows(rows) - d.topRows(rows)).eval();
  }
  return d.transpose() * d;
}

Eigen::MatrixXd sum_to_zero_basis(const Eigen::VectorXd& c) {
  const Eigen::Index n = c.size();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  return q.rightCols(n - 1);
}

}  // namespace brady
