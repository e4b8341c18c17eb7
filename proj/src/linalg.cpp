#include "pwasvar/linalg.hpp"
#include "pwasvar/error.hpp"

#include <cmath>
#include <numbers>

namespace pwasvar {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ContinuityViolation: return "ContinuityViolation";
    case ErrorKind::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorKind::NotInvertible: return "NotInvertible";
    case ErrorKind::AmbiguousInverse: return "AmbiguousInverse";
    case ErrorKind::NotThresholdAffine: return "NotThresholdAffine";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::HistoryLengthMismatch: return "HistoryLengthMismatch";
    case ErrorKind::AllStartsFailed: return "AllStartsFailed";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NotNested: return "NotNested";
    case ErrorKind::BoundaryAnchor: return "BoundaryAnchor";
    case ErrorKind::NotOrthogonal: return "NotOrthogonal";
    case ErrorKind::SkedasticNotDiagonalizable: return "SkedasticNotDiagonalizable";
    case ErrorKind::InsufficientProbes: return "InsufficientProbes";
    case ErrorKind::WeakInstrument: return "WeakInstrument";
    case ErrorKind::DriverDegenerate: return "DriverDegenerate";
    case ErrorKind::ZeroDenominator: return "ZeroDenominator";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::NonNumericCell: return "NonNumericCell";
    case ErrorKind::NonPositiveForLog: return "NonPositiveForLog";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

bool is_orthogonal(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const Matrix diff = m * m.transpose() - Matrix::Identity(m.rows(), m.cols());
  return diff.cwiseAbs().maxCoeff() <= tol;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace pwasvar
