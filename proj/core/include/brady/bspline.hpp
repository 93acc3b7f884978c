#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace brady {

// Cubic B-spline basis on equally spaced knots covering [lo, hi] (the knot
// grid extends `degree` steps beyond each end). Inputs outside the range are
// clamped to it.
class BSplineBasis {
 public:
  BSplineBasis() = default;
  BSplineBasis(double lo, double hi, int n_basis = 10, int degree = 3);

  int size() const { return n_basis_; }
  int degree() const { return degree_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& knots() const { return knots_; }

  Eigen::RowVectorXd eval(double x) const;
  Eigen::MatrixXd design(std::span<const double> x) const;

 private:
  double lo_ = 0.0;
  double hi_ = 1.0;
  int n_basis_ = 0;
  int degree_ = 3;
  double step_ = 1.0;
  std::vector<double> knots_;
};

// D^T D for the order-`order` difference matrix D on n coefficients.
Eigen::MatrixXd difference_penalty(int n, int order = 2);

// Orthonormal basis (columns) of the null space of c^T, i.e. a (n x n-1)
// matrix Z with c^T Z = 0.
Eigen::MatrixXd sum_to_zero_basis(const Eigen::VectorXd& c);

}  // namespace brady
