#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pwasvar/model.hpp"

namespace pwasvar {

/// Threshold SVAR specification for maximum likelihood.
///
/// Regimes are bands of z_{t,j} for the threshold variable j. A map that is regime
/// varying changes only its j-th column across bands, which is exactly what
/// continuity allows; every other coefficient is shared. All maps are stored
/// relative to the anchor regime, where their intercept is zero (constants live in c).
struct ModelSpec {
  enum class Normalization { LowerTriangular, FixedQ };

  std::size_t p = 2;
  std::size_t k = 1;
  std::size_t threshold_variable = 0;
  std::vector<double> thresholds{0.0};
  /// Estimate the threshold by profile search (two regimes only).
  bool free_threshold = false;
  /// Entry 0 refers to f_0, entry i to f_i. Missing entries mean regime varying.
  std::vector<bool> regime_varying;
  /// Phi_0 at the anchor regime is lower triangular; with FixedQ the structural
  /// f_0 is Q' times that lower-triangular map.
  Normalization normalization = Normalization::LowerTriangular;
  std::size_t anchor_regime = 0;
  Matrix fixed_q;
  SkedasticSpec::Kind skedastic = SkedasticSpec::Kind::Homoskedastic;
  std::size_t skedastic_lag = 1;
  std::size_t exogenous_levels = 0;
  std::size_t skedastic_reference = 0;

  std::size_t num_regimes() const { return thresholds.size() + 1; }
  bool varying(std::size_t map) const { return map >= regime_varying.size() || regime_varying[map]; }
  std::size_t skedastic_groups() const;
  /// Throws InvalidArgument on inconsistent fields.
  void validate() const;
  RegimePartition partition() const;
};

/// Position of every free parameter in the flat vector.
///
/// Order: f_0 anchor matrix (lower-triangular entries, row major), f_0 column
/// increments per boundary, then for each lag its anchor matrix (row major) and
/// increments, the intercept c, the threshold (if free) and log standard
/// deviations of each non-reference skedastic group.
struct ParamLayout {
  explicit ParamLayout(const ModelSpec& spec);

  std::size_t size() const { return total; }
  /// Free parameters excluding a free threshold (the count that enters LR degrees of freedom).
  std::size_t smooth_size() const { return total - (threshold == npos ? 0 : 1); }
  std::vector<std::string> names() const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::vector<std::size_t> map_offset;  // k+1 entries
  std::size_t intercept = 0;
  std::size_t threshold = npos;
  std::size_t skedastic = npos;
  std::size_t total = 0;

 private:
  ModelSpec spec_;
};

std::size_t parameter_count(const ModelSpec& spec);

/// Structured model from a parameter vector. Throws NotInvertible when f_0 fails
/// the determinant condition.
PwaSvarModel unpack(const ModelSpec& spec, const Vector& params);

/// Inverse of unpack for any model on the spec's partition whose maps respect the
/// regime-varying pattern. Anchor intercepts are folded into c.
Vector pack(const ModelSpec& spec, const PwaSvarModel& model);

/// Sum over t = k+1..T of conditional_log_density; -infinity when the parameters
/// violate the determinant condition. data is T x p; exogenous (if used) has T levels.
double log_likelihood(const ModelSpec& spec, const Vector& params, const Matrix& data,
                      std::span<const std::size_t> exogenous = {});

struct EstimationOptions {
  std::size_t restarts = 8;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 5000;
  double tolerance = 1e-10;
  double perturbation = 0.1;
  std::size_t threshold_grid = 25;
  /// Lower and upper sample quantiles of the threshold variable spanned by the grid.
  double threshold_trim = 0.15;
  bool standard_errors = true;
};

struct EstimationResult {
  ModelSpec spec;
  Vector params;
  std::vector<std::string> names;
  std::optional<PwaSvarModel> model;
  double log_likelihood = 0.0;
  bool converged = false;
  std::size_t restarts = 0;
  std::size_t successful_starts = 0;
  InvertibilityCertificate certificate;
  Matrix covariance;  // NaN where the Hessian is not negative definite
  Vector std_errors;  // NaN for the threshold
  double gradient_norm = 0.0;
  std::uint64_t seed = 0;
};

EstimationResult estimate_ml(const ModelSpec& spec, const Matrix& data, const EstimationOptions& options = {},
                             std::span<const std::size_t> exogenous = {});

/// Upper tail of the chi-square distribution.
double chi2_sf(double x, double df);

struct LrTest {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
  /// 2(logL_u - logL_r) before clamping; clamped is set when it fell below -1e-6.
  double raw_statistic = 0.0;
  bool clamped = false;
};

LrTest lr_test(const EstimationResult& unrestricted, const EstimationResult& restricted, std::size_t df);

/// "21.7 [0.00]"
std::string format_lr(const LrTest& test);

struct HypothesisRow {
  std::string hypothesis;
  LrTest test;
};

struct HypothesisReport {
  EstimationResult unrestricted;
  EstimationResult no_switching;
  EstimationResult linear;
  std::vector<HypothesisRow> rows;
};

/// Estimates the unrestricted two-regime model, the model with a regime-invariant
/// f_0 and the linear model, and returns the two LR rows.
HypothesisReport test_hypotheses(const ModelSpec& spec, const Matrix& data, const EstimationOptions& options = {},
                                 std::span<const std::size_t> exogenous = {});

}  // namespace pwasvar
