#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "pwasvar/pwa_map.hpp"

namespace pwasvar {

/// Isotropic mean-zero Gaussian kernel with standard deviation h per coordinate.
struct GaussianKernel {
  explicit GaussianKernel(double bandwidth);
  double bandwidth;
};

/// Exact Gaussian convolution of a threshold-affine map.
///
/// A continuous threshold-affine map can be written as
///   f(z) = Phi(1) z + phibar(1) + sum_j m_j max(a'z - tau_j, 0),
/// and a'u ~ N(0, sigma_a^2) with sigma_a = h ||a||, so each hinge smooths to
///   E max(s + a'u - tau, 0) = (s - tau) Phi((s - tau)/sigma_a) + sigma_a phi((s - tau)/sigma_a).
class SmoothedThresholdMap {
 public:
  SmoothedThresholdMap(PwaMap base, GaussianKernel kernel);

  const PwaMap& base() const { return base_; }
  double bandwidth() const { return bandwidth_; }
  double sigma() const { return sigma_; }
  const std::vector<Vector>& kinks() const { return kinks_; }

  Vector evaluate(const Vector& z) const;
  Matrix jacobian(const Vector& z) const;
  /// Weights mu_l >= 0, sum 1, with jacobian(z) = sum_l mu_l Phi(l).
  std::vector<double> hull_weights(const Vector& z) const;

 private:
  PwaMap base_;
  double bandwidth_;
  double sigma_;
  Vector direction_;
  std::vector<double> thresholds_;
  std::vector<Vector> kinks_;  // m_j: slope increment across threshold j
};

/// Throws NotThresholdAffine for conic maps.
SmoothedThresholdMap smooth_threshold_affine(const PwaMap& map, GaussianKernel kernel);

struct NumericSmoothingOptions {
  std::size_t nodes = 64;
  bool monte_carlo_fallback = false;
  std::size_t mc_draws = 1'000'000;
  std::uint64_t seed = 0;
};

/// Tensor-product quadrature of the convolution in a frame aligned with each kink
/// direction: Gauss-Legendre panels split at the kinks along that axis and
/// Gauss-Hermite (options.nodes points) along the orthogonal axes.
Vector smooth_numeric(const PwaMap& map, GaussianKernel kernel, const Vector& z,
                      const NumericSmoothingOptions& options = {});

struct MonteCarloEstimate {
  Vector mean;
  Vector std_error;
};

/// Plain Monte Carlo estimate of the convolution. Draws come in fixed chunks from
/// counter-based substreams, so the result depends only on (seed, draws).
MonteCarloEstimate smooth_monte_carlo(const PwaMap& map, GaussianKernel kernel, const Vector& z,
                                      std::size_t draws, std::uint64_t seed);

/// Scalar smooth transition f(z) = [1 - F(z)] a1 z + F(z) a2 z with logistic F of
/// scale s, interpolating the kink a1 min(z, 0) + a2 max(z, 0).
class LogisticTransitionMap {
 public:
  LogisticTransitionMap(double a1, double a2, double scale);

  double operator()(double z) const;
  double weight(double z) const;
  double kink(double z) const;

  double a1() const { return a1_; }
  double a2() const { return a2_; }
  double scale() const { return scale_; }

 private:
  double a1_, a2_, scale_;
};

LogisticTransitionMap logistic_transition(double a1, double a2, double scale);

struct MonotonicityReport {
  bool monotone = true;
  std::optional<double> violation;  // grid point where the increment changes sign
};

MonotonicityReport check_scalar_monotone(const std::function<double(double)>& f, double lo, double hi,
                                         std::size_t n);

struct SmoothInverseOptions {
  int max_iterations = 200;
  int max_stalls = 50;
  double tolerance = 1e-12;
};

/// Solves f_K(z) = w. The base map must be certified invertible.
Vector invert_smooth(const SmoothedThresholdMap& smoothed, const Vector& w,
                     const SmoothInverseOptions& options = {});

}  // namespace pwasvar
