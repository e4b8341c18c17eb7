#pragma once

#include <Eigen/Dense>

namespace pwasvar {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Largest singular value.
double operator_norm(const Matrix& m);

/// True when m m^T = I within tol (max abs entry of the difference).
bool is_orthogonal(const Matrix& m, double tol);

/// Standard normal cdf and pdf.
double normal_cdf(double x);
double normal_pdf(double x);

}  // namespace pwasvar
