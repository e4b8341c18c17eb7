#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pwasvar/pwa_map.hpp"

namespace pwasvar {

/// Lagged values ordered most recent first: history[0] = z_{t-1}, history[i-1] = z_{t-i}.
using History = std::span<const Vector>;

/// Diagonal conditional standard deviations of the structural shocks.
///
/// DiagonalRegime selects sd[g] by the regime g of the lagged value z_{t-lag};
/// ExogenousDummy selects it by the level g of a supplied exogenous series.
/// sd[reference] is the identity, fixing the overall scale.
struct SkedasticSpec {
  enum class Kind { Homoskedastic, DiagonalRegime, ExogenousDummy };

  Kind kind = Kind::Homoskedastic;
  std::size_t lag = 1;
  std::vector<Vector> sd;
  std::size_t reference = 0;

  static SkedasticSpec homoskedastic() { return {}; }
  static SkedasticSpec diagonal_regime(std::size_t lag, std::vector<Vector> sd, std::size_t reference = 0);
  static SkedasticSpec exogenous_dummy(std::vector<Vector> sd, std::size_t reference = 0);

  std::size_t num_groups() const { return kind == Kind::Homoskedastic ? 1 : sd.size(); }
  /// Throws ValidationError on non-positive entries, a non-identity reference, or
  /// a group count that does not match the partition.
  void validate(std::size_t p, std::size_t k, std::size_t regimes) const;
  /// Group index for the current step (0 when homoskedastic).
  std::size_t group(const RegimePartition& partition, History history,
                    std::optional<std::size_t> exogenous) const;
  Vector sd_for(const RegimePartition& partition, History history, std::optional<std::size_t> exogenous) const;
};

/// f_0(z_t) = c + sum_i f_i(z_{t-i}) + sigma_t eps_t with piecewise-affine maps on a
/// shared partition and eps_t ~ N(0, I).
class PwaSvarModel {
 public:
  /// Validates continuity of every map, the shared partition, the skedastic
  /// specification and the invertibility certificate of f_0.
  PwaSvarModel(Vector intercept, PwaMap f0, std::vector<PwaMap> lags,
               SkedasticSpec shocks = SkedasticSpec::homoskedastic());

  std::size_t dim() const { return f0_.dim(); }
  std::size_t lags_count() const { return lags_.size(); }
  std::size_t num_regimes() const { return f0_.num_regimes(); }
  const Vector& intercept() const { return intercept_; }
  const PwaMap& f0() const { return f0_; }
  /// Lag map f_i for i = 1..k.
  const PwaMap& lag(std::size_t i) const { return lags_.at(i - 1); }
  const std::vector<PwaMap>& lag_maps() const { return lags_; }
  const SkedasticSpec& shocks() const { return shocks_; }
  const RegimePartition& partition() const { return f0_.partition(); }
  const InvertibilityCertificate& certificate() const { return certificate_; }

 private:
  Vector intercept_;
  PwaMap f0_;
  std::vector<PwaMap> lags_;
  SkedasticSpec shocks_;
  InvertibilityCertificate certificate_;
};

/// c + sum_i f_i(z_{t-i}).
Vector rhs_mean(const PwaSvarModel& model, History history);

struct StepResult {
  Vector z;
  std::size_t regime = 0;
};

StepResult solve_step(const PwaSvarModel& model, History history, const Vector& shock,
                      std::optional<std::size_t> exogenous = std::nullopt);

/// log density of z_t = xi given the history (Gaussian shocks).
double conditional_log_density(const PwaSvarModel& model, const Vector& xi, History history,
                               std::optional<std::size_t> exogenous = std::nullopt);

/// Structural residual sigma_t^{-1} [f_0(xi) - rhs_mean].
Vector structural_shock(const PwaSvarModel& model, const Vector& xi, History history,
                        std::optional<std::size_t> exogenous = std::nullopt);

struct SimulationOptions {
  /// Multiplies every shock draw; 0 gives the deterministic skeleton.
  double shock_scale = 1.0;
  /// Exogenous level in force at each step t = 1..T (ExogenousDummy only).
  std::vector<std::size_t> exogenous;
};

struct SimulationResult {
  Matrix path;    // T x p, row t-1 holds z_t
  Matrix shocks;  // T x p
  std::vector<std::size_t> regimes;
  std::uint64_t seed = 0;
  std::vector<Vector> initial_history;  // most recent first
};

/// Iterates solve_step with shocks from CounterRng(seed, 0).
SimulationResult simulate(const PwaSvarModel& model, const std::vector<Vector>& initial_history, std::size_t periods,
                          std::uint64_t seed, const SimulationOptions& options = {});

/// Rank of the stacked lag matrices [Phi_1(l_1) ... Phi_k(l_k)] minimized over regime
/// choices: a diagnostic for the rank condition on the lag maps, not a certificate
/// of surjectivity.
std::size_t lag_rank_diagnostic(const PwaSvarModel& model);

}  // namespace pwasvar
