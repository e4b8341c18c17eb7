#include "pwasvar/irf.hpp"

#include <cmath>
#include <string>

#include "pwasvar/error.hpp"
#include "pwasvar/rng.hpp"

namespace pwasvar {

GirfResult girf(const PwaSvarModel& model, const std::vector<Vector>& history, std::size_t shock, double size,
                std::size_t horizon, std::size_t draws, std::uint64_t seed, const GirfOptions& options) {
  const std::size_t p = model.dim(), k = model.lags_count();
  if (draws < 1) throw Error(ErrorKind::InvalidArgument, "girf needs at least one draw");
  if (shock >= p) throw Error(ErrorKind::InvalidArgument, "shock index out of range");
  if (history.size() != k)
    throw Error(ErrorKind::HistoryLengthMismatch, "history must hold " + std::to_string(k) + " values");
  const bool exo = model.shocks().kind == SkedasticSpec::Kind::ExogenousDummy;
  if (exo && options.exogenous.size() != horizon + 1)
    throw Error(ErrorKind::InvalidArgument, "exogenous path must cover horizons 0..H");

  const auto rows = static_cast<Eigen::Index>(horizon + 1);
  const auto cols = static_cast<Eigen::Index>(p);
  // Welford running mean and sum of squared deviations, in replicate order.
  Matrix mean = Matrix::Zero(rows, cols), m2 = Matrix::Zero(rows, cols);
  Matrix eps(rows, cols);
  std::vector<Vector> base_hist, shocked_hist;
  for (std::size_t r = 0; r < draws; ++r) {
    CounterRng rng(seed, r);
    if (options.zero_future_shocks) {
      eps.setZero();
    } else {
      for (Eigen::Index h = 0; h < rows; ++h)
        for (Eigen::Index j = 0; j < cols; ++j) eps(h, j) = rng.normal();
    }
    base_hist = history;
    shocked_hist = history;
    for (Eigen::Index h = 0; h < rows; ++h) {
      Vector e = eps.row(h).transpose();
      std::optional<std::size_t> level;
      if (exo) level = options.exogenous[static_cast<std::size_t>(h)];
      const Vector zb = solve_step(model, base_hist, e, level).z;
      if (h == 0) e[static_cast<Eigen::Index>(shock)] += size;
      const Vector zs = solve_step(model, shocked_hist, e, level).z;
      const Eigen::RowVectorXd d = (zs - zb).transpose();
      const Eigen::RowVectorXd delta = d - mean.row(h);
      mean.row(h) += delta / static_cast<double>(r + 1);
      m2.row(h) += delta.cwiseProduct(d - mean.row(h));
      if (k > 0) {
        base_hist.pop_back();
        base_hist.insert(base_hist.begin(), zb);
        shocked_hist.pop_back();
        shocked_hist.insert(shocked_hist.begin(), zs);
      }
    }
  }
  GirfResult out;
  const double n = static_cast<double>(draws);
  out.response = mean;
  if (draws > 1) {
    out.mc_se = (m2 / (n - 1.0) / n).cwiseSqrt();
  } else {
    out.mc_se = Matrix::Zero(rows, cols);
  }
  out.shock = shock;
  out.size = size;
  out.draws = draws;
  out.seed = seed;
  out.history = history;
  out.zero_future_shocks = options.zero_future_shocks;
  return out;
}

double cumulative_multiplier(const Vector& target, const Vector& driver, std::size_t h) {
  const auto n = static_cast<Eigen::Index>(h + 1);
  if (target.size() < n || driver.size() < n) throw Error(ErrorKind::InvalidArgument, "horizon beyond the responses");
  const double den = driver.head(n).sum();
  if (std::abs(den) < 1e-10) throw Error(ErrorKind::DriverDegenerate, "cumulative driver response is zero");
  return target.head(n).sum() / den;
}

double cumulative_multiplier(const GirfResult& g, std::size_t target, std::size_t driver, std::size_t h) {
  return cumulative_multiplier(g.response.col(static_cast<Eigen::Index>(target)),
                               g.response.col(static_cast<Eigen::Index>(driver)), h);
}

double kinked_slope(const PwaSvarModel& model, std::size_t regime) {
  if (model.dim() != 2) throw Error(ErrorKind::InvalidArgument, "kinked_slope needs a bivariate model");
  const Matrix& m = model.f0().regime(regime).matrix;
  if (m(1, 1) == 0.0) throw Error(ErrorKind::ZeroDenominator, "Phi0[2,2] is zero");
  return -m(1, 0) / m(1, 1);
}

PhillipsScatter phillips_partial_residuals(const PwaSvarModel& model, const Matrix& data) {
  if (model.dim() != 2) throw Error(ErrorKind::InvalidArgument, "partial residuals need a bivariate model");
  if (data.cols() != 2) throw Error(ErrorKind::InvalidArgument, "data must have two columns");
  const std::size_t k = model.lags_count();
  PhillipsScatter out;
  for (std::size_t l = 0; l < model.num_regimes(); ++l) out.slopes.push_back(kinked_slope(model, l));
  std::vector<Vector> hist(k);
  for (Eigen::Index t = static_cast<Eigen::Index>(k); t < data.rows(); ++t) {
    for (std::size_t i = 0; i < k; ++i) hist[i] = data.row(t - static_cast<Eigen::Index>(i) - 1).transpose();
    const Vector z = data.row(t).transpose();
    const std::size_t l = model.f0().regime_of(z);
    const AffinePiece& piece = model.f0().regime(l);
    const double rest = rhs_mean(model, hist)[1] - piece.intercept[1];
    out.points.push_back({static_cast<std::size_t>(t), z[0], z[1] - rest / piece.matrix(1, 1), l});
  }
  return out;
}

}  // namespace pwasvar
