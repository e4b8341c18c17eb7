#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pwasvar/model.hpp"

namespace pwasvar {

struct GirfOptions {
  /// Set every draw to zero, so only the impact shock moves the system.
  bool zero_future_shocks = false;
  /// Exogenous levels for horizons 0..H (ExogenousDummy models only).
  std::vector<std::size_t> exogenous;
};

struct GirfResult {
  Matrix response;  // (H+1) x p mean difference shocked - baseline
  Matrix mc_se;     // (H+1) x p
  std::size_t shock = 0;
  double size = 1.0;
  std::size_t draws = 0;
  std::uint64_t seed = 0;
  std::vector<Vector> history;
  bool zero_future_shocks = false;

  std::size_t horizon() const { return static_cast<std::size_t>(response.rows()) - 1; }
};

/// Generalized impulse response with common random numbers: replicate r draws its
/// shock path from CounterRng(seed, r); the shocked path adds size * e_shock at impact.
GirfResult girf(const PwaSvarModel& model, const std::vector<Vector>& history, std::size_t shock, double size,
                std::size_t horizon, std::size_t draws, std::uint64_t seed, const GirfOptions& options = {});

/// sum_{s<=h} target[s] / sum_{s<=h} driver[s]. Throws DriverDegenerate when the
/// denominator is below 1e-10 in magnitude.
double cumulative_multiplier(const Vector& target, const Vector& driver, std::size_t h);
double cumulative_multiplier(const GirfResult& girf, std::size_t target, std::size_t driver, std::size_t h);

/// -Phi_0^(l)[2,1] / Phi_0^(l)[2,2] for a bivariate model.
double kinked_slope(const PwaSvarModel& model, std::size_t regime);

struct PartialResidual {
  std::size_t t = 0;  // data row
  double log_theta = 0.0;
  double adjusted_inflation = 0.0;
  std::size_t regime = 0;
};

struct PhillipsScatter {
  std::vector<PartialResidual> points;
  std::vector<double> slopes;  // kinked_slope per regime
};

/// Inflation with every term of the second structural equation removed except the
/// regime-specific slope on the first variable, for rows k..T-1 of data.
PhillipsScatter phillips_partial_residuals(const PwaSvarModel& model, const Matrix& data);

}  // namespace pwasvar
