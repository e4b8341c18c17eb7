#include "pwasvar/model.hpp"

#include <cmath>
#include <deque>
#include <numbers>
#include <string>

#include "pwasvar/error.hpp"
#include "pwasvar/rng.hpp"

namespace pwasvar {

SkedasticSpec SkedasticSpec::diagonal_regime(std::size_t lag, std::vector<Vector> sd, std::size_t reference) {
  SkedasticSpec s;
  s.kind = Kind::DiagonalRegime;
  s.lag = lag;
  s.sd = std::move(sd);
  s.reference = reference;
  return s;
}

SkedasticSpec SkedasticSpec::exogenous_dummy(std::vector<Vector> sd, std::size_t reference) {
  SkedasticSpec s;
  s.kind = Kind::ExogenousDummy;
  s.sd = std::move(sd);
  s.reference = reference;
  return s;
}

void SkedasticSpec::validate(std::size_t p, std::size_t k, std::size_t regimes) const {
  if (kind == Kind::Homoskedastic) return;
  if (sd.empty()) throw Error(ErrorKind::ValidationError, "skedastic spec has no groups");
  if (kind == Kind::DiagonalRegime) {
    if (lag < 1 || lag > k)
      throw Error(ErrorKind::ValidationError, "skedastic selector lag " + std::to_string(lag) + " outside 1.." +
                                                  std::to_string(k));
    if (sd.size() != regimes)
      throw Error(ErrorKind::ValidationError, "skedastic spec needs one sd vector per regime");
  }
  if (reference >= sd.size()) throw Error(ErrorKind::ValidationError, "skedastic reference group out of range");
  for (std::size_t g = 0; g < sd.size(); ++g) {
    if (static_cast<std::size_t>(sd[g].size()) != p)
      throw Error(ErrorKind::ValidationError, "skedastic sd vector " + std::to_string(g) + " has wrong length");
    if ((sd[g].array() <= 0.0).any() || !sd[g].allFinite())
      throw Error(ErrorKind::ValidationError, "skedastic sd entries must be positive");
  }
  if ((sd[reference].array() != 1.0).any())
    throw Error(ErrorKind::ValidationError, "skedastic sd at the reference group must equal one");
}

std::size_t SkedasticSpec::group(const RegimePartition& partition, History history,
                                 std::optional<std::size_t> exogenous) const {
  switch (kind) {
    case Kind::Homoskedastic:
      return 0;
    case Kind::DiagonalRegime:
      if (history.size() < lag) throw Error(ErrorKind::HistoryLengthMismatch, "history shorter than skedastic lag");
      return partition.regime_of(history[lag - 1]);
    case Kind::ExogenousDummy:
      if (!exogenous) throw Error(ErrorKind::InvalidArgument, "exogenous level required");
      if (*exogenous >= sd.size())
        throw Error(ErrorKind::InvalidArgument, "exogenous level " + std::to_string(*exogenous) + " out of range");
      return *exogenous;
  }
  return 0;
}

Vector SkedasticSpec::sd_for(const RegimePartition& partition, History history,
                             std::optional<std::size_t> exogenous) const {
  if (kind == Kind::Homoskedastic) return Vector::Ones(partition.dim());
  return sd[group(partition, history, exogenous)];
}

PwaSvarModel::PwaSvarModel(Vector intercept, PwaMap f0, std::vector<PwaMap> lags, SkedasticSpec shocks)
    : intercept_(std::move(intercept)), f0_(std::move(f0)), lags_(std::move(lags)), shocks_(std::move(shocks)) {
  const std::size_t p = f0_.dim();
  if (static_cast<std::size_t>(intercept_.size()) != p)
    throw Error(ErrorKind::ValidationError, "intercept length does not match dimension");
  require_continuous(f0_);
  for (std::size_t i = 0; i < lags_.size(); ++i) {
    if (lags_[i].dim() != p)
      throw Error(ErrorKind::ValidationError, "lag map " + std::to_string(i + 1) + " has wrong dimension");
    if (!(lags_[i].partition() == f0_.partition()))
      throw Error(ErrorKind::ValidationError, "lag map " + std::to_string(i + 1) + " does not share f0's partition");
    require_continuous(lags_[i]);
  }
  shocks_.validate(p, lags_.size(), f0_.num_regimes());
  certificate_ = check_invertibility(f0_);
  if (!certificate_.invertible)
    throw Error(ErrorKind::NotInvertible, "f0 fails the determinant condition");
}

Vector rhs_mean(const PwaSvarModel& model, History history) {
  if (history.size() != model.lags_count())
    throw Error(ErrorKind::HistoryLengthMismatch, "history has " + std::to_string(history.size()) +
                                                      " values, model has " + std::to_string(model.lags_count()) +
                                                      " lags");
  Vector out = model.intercept();
  for (std::size_t i = 0; i < history.size(); ++i) out += model.lag_maps()[i].evaluate(history[i]);
  return out;
}

StepResult solve_step(const PwaSvarModel& model, History history, const Vector& shock,
                      std::optional<std::size_t> exogenous) {
  const Vector sd = model.shocks().sd_for(model.partition(), history, exogenous);
  const Vector w = rhs_mean(model, history) + sd.cwiseProduct(shock);
  StepResult out;
  out.z = invert(model.f0(), w);
  out.regime = model.f0().regime_of(out.z);
  return out;
}

Vector structural_shock(const PwaSvarModel& model, const Vector& xi, History history,
                        std::optional<std::size_t> exogenous) {
  const Vector sd = model.shocks().sd_for(model.partition(), history, exogenous);
  return (model.f0().evaluate(xi) - rhs_mean(model, history)).cwiseQuotient(sd);
}

double conditional_log_density(const PwaSvarModel& model, const Vector& xi, History history,
                               std::optional<std::size_t> exogenous) {
  const Vector sd = model.shocks().sd_for(model.partition(), history, exogenous);
  const Vector u = (model.f0().evaluate(xi) - rhs_mean(model, history)).cwiseQuotient(sd);
  const double p = static_cast<double>(model.dim());
  const double det = model.f0().lu(model.f0().regime_of(xi)).determinant();
  return -0.5 * p * std::log(2.0 * std::numbers::pi) - 0.5 * u.squaredNorm() + std::log(std::abs(det)) -
         sd.array().log().sum();
}

SimulationResult simulate(const PwaSvarModel& model, const std::vector<Vector>& initial_history, std::size_t periods,
                          std::uint64_t seed, const SimulationOptions& options) {
  if (periods < 1) throw Error(ErrorKind::InvalidArgument, "simulation length must be at least 1");
  const std::size_t p = model.dim();
  const std::size_t k = model.lags_count();
  if (initial_history.size() != k)
    throw Error(ErrorKind::HistoryLengthMismatch, "initial history must hold " + std::to_string(k) + " values");
  const bool exo = model.shocks().kind == SkedasticSpec::Kind::ExogenousDummy;
  if (exo && options.exogenous.size() != periods)
    throw Error(ErrorKind::InvalidArgument, "exogenous series must cover every simulated period");

  SimulationResult out;
  out.path.resize(static_cast<Eigen::Index>(periods), static_cast<Eigen::Index>(p));
  out.shocks.resize(static_cast<Eigen::Index>(periods), static_cast<Eigen::Index>(p));
  out.regimes.resize(periods);
  out.seed = seed;
  out.initial_history = initial_history;

  CounterRng rng(seed, 0);
  std::vector<Vector> history = initial_history;
  Vector eps(p);
  for (std::size_t t = 0; t < periods; ++t) {
    for (std::size_t j = 0; j < p; ++j) eps[j] = options.shock_scale * rng.normal();
    std::optional<std::size_t> level;
    if (exo) level = options.exogenous[t];
    const StepResult step = solve_step(model, history, eps, level);
    out.path.row(static_cast<Eigen::Index>(t)) = step.z.transpose();
    out.shocks.row(static_cast<Eigen::Index>(t)) = eps.transpose();
    out.regimes[t] = step.regime;
    if (k > 0) {
      history.pop_back();
      history.insert(history.begin(), step.z);
    }
  }
  return out;
}

std::size_t lag_rank_diagnostic(const PwaSvarModel& model) {
  const std::size_t p = model.dim();
  const std::size_t k = model.lags_count();
  if (k == 0) return 0;
  const std::size_t regimes = model.num_regimes();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < k && combos <= 4096; ++i) combos *= regimes;
  std::size_t best = p;
  std::vector<std::size_t> choice(k, 0);
  Matrix stacked(p, p * k);
  auto rank_of = [&] {
    for (std::size_t i = 0; i < k; ++i)
      stacked.middleCols(static_cast<Eigen::Index>(i * p), static_cast<Eigen::Index>(p)) =
          model.lag_maps()[i].regime(choice[i]).matrix;
    Eigen::FullPivLU<Matrix> lu(stacked);
    lu.setThreshold(1e-10);
    return static_cast<std::size_t>(lu.rank());
  };
  if (combos > 4096) {
    for (std::size_t l = 0; l < regimes; ++l) {
      std::fill(choice.begin(), choice.end(), l);
      best = std::min(best, rank_of());
    }
    return best;
  }
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rest = c;
    for (std::size_t i = 0; i < k; ++i) {
      choice[i] = rest % regimes;
      rest /= regimes;
    }
    best = std::min(best, rank_of());
  }
  return best;
}

}  // namespace pwasvar
