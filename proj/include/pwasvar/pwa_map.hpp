#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/LU>

#include "pwasvar/linalg.hpp"

namespace pwasvar {

/// Bands {z : tau_{l-1} < a'z <= tau_l} with tau_0 = -inf, tau_L = +inf.
struct ThresholdPartition {
  Vector direction;
  std::vector<double> thresholds;
};

/// Unions of the 2^p cones cut out by the rows a_i' of an invertible basis.
/// Pattern index m has bit i set iff a_i'z >= 0; pattern_labels[m] is its regime.
struct ConicPartition {
  Matrix basis;
  std::vector<std::size_t> pattern_labels;
};

/// Convex partition of R^p into L regimes. Regime indices are 0-based in the API;
/// serialized files and CSV exports use 1-based labels.
class RegimePartition {
 public:
  static RegimePartition threshold(Vector direction, std::vector<double> thresholds);
  static RegimePartition conic(Matrix basis, std::vector<std::size_t> pattern_labels);
  /// One regime covering R^p.
  static RegimePartition whole_space(std::size_t p);

  bool is_threshold() const { return std::holds_alternative<ThresholdPartition>(data_); }
  bool is_conic() const { return !is_threshold(); }
  const ThresholdPartition& threshold_data() const { return std::get<ThresholdPartition>(data_); }
  const ConicPartition& conic_data() const { return std::get<ConicPartition>(data_); }

  std::size_t dim() const;
  std::size_t num_regimes() const { return num_regimes_; }

  std::size_t regime_of(const Vector& z) const;
  /// Sign-pattern index of z (conic partitions only).
  std::size_t pattern_of(const Vector& z) const;
  /// Distance of z to the nearest regime boundary, measured in the coordinate that
  /// defines the boundary (a'z for bands, a_i'z for cones).
  double boundary_distance(const Vector& z) const;

  bool operator==(const RegimePartition& other) const;

 private:
  explicit RegimePartition(std::variant<ThresholdPartition, ConicPartition> data, std::size_t l)
      : data_(std::move(data)), num_regimes_(l) {}

  std::variant<ThresholdPartition, ConicPartition> data_;
  std::size_t num_regimes_;
};

struct AffinePiece {
  Vector intercept;
  Matrix matrix;
};

/// Continuous piecewise-affine map z -> intercept(l) + matrix(l) z on regime l.
///
/// Conic maps additionally keep the per-coordinate split form
///   f(z) = sum_i [psi_i^+ 1{y_i >= 0} + psi_i^- 1{y_i < 0}] y_i,  y = A z,
/// with psi_i^+ (psi_i^-) the i-th column of psi_plus (psi_minus).
class PwaMap {
 public:
  /// Structural checks only (sizes, partition); continuity is reported by
  /// validate_continuity.
  static PwaMap threshold_affine(ThresholdPartition partition, std::vector<AffinePiece> regimes);
  static PwaMap conic_split(Matrix basis, Matrix psi_plus, Matrix psi_minus,
                            std::vector<std::size_t> pattern_labels = {});
  /// Conic map from per-label matrices. The split form is recovered by averaging;
  /// inconsistent inputs surface in validate_continuity.
  static PwaMap conic_from_regimes(Matrix basis, std::vector<std::size_t> pattern_labels,
                                   std::vector<Matrix> matrices);
  static PwaMap affine(Vector intercept, Matrix matrix);
  /// Piecewise map on an existing partition (threshold or conic).
  static PwaMap on_partition(const RegimePartition& partition, std::vector<AffinePiece> regimes);

  std::size_t dim() const { return static_cast<std::size_t>(regimes_.front().matrix.rows()); }
  std::size_t num_regimes() const { return regimes_.size(); }
  const RegimePartition& partition() const { return partition_; }
  const AffinePiece& regime(std::size_t l) const { return regimes_.at(l); }
  const std::vector<AffinePiece>& regimes() const { return regimes_; }

  const Matrix& psi_plus() const { return psi_plus_; }
  const Matrix& psi_minus() const { return psi_minus_; }

  std::size_t regime_of(const Vector& z) const { return partition_.regime_of(z); }
  Vector evaluate(const Vector& z) const;
  Vector evaluate_in(std::size_t regime, const Vector& z) const;
  const Matrix& jacobian_at(const Vector& z) const { return regimes_[regime_of(z)].matrix; }

  /// Q f: every intercept, matrix (and split column) premultiplied by q.
  PwaMap premultiplied(const Matrix& q) const;

  /// Cached factorization of regime l's matrix.
  const Eigen::PartialPivLU<Matrix>& lu(std::size_t l) const { return lus_[l]; }

 private:
  PwaMap(RegimePartition partition, std::vector<AffinePiece> regimes);
  void factorize();

  RegimePartition partition_;
  std::vector<AffinePiece> regimes_;
  Matrix psi_plus_;
  Matrix psi_minus_;
  std::vector<Eigen::PartialPivLU<Matrix>> lus_;
};

struct ContinuityViolation {
  std::size_t lower_regime = 0;
  std::size_t upper_regime = 0;
  double matrix_residual = 0.0;
  double intercept_residual = 0.0;
};

struct ContinuityReport {
  bool ok = true;
  std::vector<ContinuityViolation> violations;
};

ContinuityReport validate_continuity(const PwaMap& map);
/// Throws Error(ContinuityViolation) naming the first offending pair.
void require_continuous(const PwaMap& map);

struct InvertibilityCertificate {
  bool invertible = false;
  int sign = 0;  // +1, -1, or 0 when no common sign exists
  bool per_pattern = false;  // determinants indexed by sign pattern (conic) or regime
  std::vector<double> determinants;
  std::vector<std::size_t> failing;
};

struct CertificateOptions {
  std::size_t max_conic_dim = 20;
};

InvertibilityCertificate check_invertibility(const PwaMap& map, const CertificateOptions& options = {});

/// Unique preimage of w by regime enumeration. Requires a certified map.
Vector invert(const PwaMap& map, const Vector& w);

struct SegmentDecomposition {
  std::vector<double> breakpoints;  // 0 = d_0 < ... < d_{m+1} = 1
  std::vector<double> weights;      // d_{i+1} - d_i
  std::vector<std::size_t> labels;  // regime of each sub-segment
  Matrix effective;                 // sum_i weights[i] * Phi(labels[i])
  double residual = 0.0;            // ||f(x'') - f(x') - effective (x'' - x')||
  bool degenerate = false;          // x' == x''
};

SegmentDecomposition segment_decomposition(const PwaMap& map, const Vector& from, const Vector& to);

/// max_l ||Phi(l)||_2, a global Lipschitz constant.
double lipschitz_upper_bound(const PwaMap& map);
/// Sampled estimate of inf ||f(x)-f(y)|| / ||x-y|| over random pairs. An estimate,
/// not a bound.
double sampled_lower_lipschitz(const PwaMap& map, std::size_t pairs, std::uint64_t seed);

}  // namespace pwasvar
