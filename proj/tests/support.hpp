// Shared generators and independent oracles for the unit and acceptance suites.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "pwasvar/estimation.hpp"
#include "pwasvar/model.hpp"
#include "pwasvar/pwa_map.hpp"
#include "pwasvar/rng.hpp"

namespace pwasvar::testing {

inline Vector random_vector(CounterRng& rng, Eigen::Index n, double scale = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

inline Matrix random_matrix(CounterRng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

/// Haar-ish orthogonal matrix from the QR of a Gaussian matrix.
inline Matrix random_orthogonal(CounterRng& rng, Eigen::Index p) {
  const Matrix g = random_matrix(rng, p, p);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < p; ++i)
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  return q;
}

/// Continuous threshold-affine map built from slope increments m_l a'.
inline PwaMap random_threshold_map(CounterRng& rng, Eigen::Index p, std::size_t regimes,
                                   bool axis_direction = false) {
  Vector a = axis_direction ? Vector(Vector::Unit(p, 0)) : random_vector(rng, p);
  std::vector<double> taus;
  for (std::size_t l = 1; l < regimes; ++l) taus.push_back(rng.normal());
  std::sort(taus.begin(), taus.end());
  std::vector<AffinePiece> pieces;
  pieces.push_back({random_vector(rng, p), random_matrix(rng, p, p) + 2.0 * Matrix::Identity(p, p)});
  for (std::size_t l = 1; l < regimes; ++l) {
    const Vector m = random_vector(rng, p);
    const auto& prev = pieces.back();
    pieces.push_back({prev.intercept - taus[l - 1] * m, prev.matrix + m * a.transpose()});
  }
  return PwaMap::threshold_affine({a, taus}, std::move(pieces));
}

/// Piecewise-linear conic map whose regimes are the sign patterns of the first
/// `split` coordinates of y = A z (so 2^split regimes).
inline PwaMap random_conic_map(CounterRng& rng, Eigen::Index p, Eigen::Index split) {
  const Matrix basis = random_matrix(rng, p, p) + 1.5 * Matrix::Identity(p, p);
  const Matrix plus = random_matrix(rng, p, p) + 2.0 * Matrix::Identity(p, p);
  Matrix minus = plus;
  for (Eigen::Index i = 0; i < split; ++i) minus.col(i) = plus.col(i) + random_vector(rng, p);
  const std::size_t patterns = std::size_t{1} << p;
  std::vector<std::size_t> labels(patterns);
  for (std::size_t m = 0; m < patterns; ++m) labels[m] = m & ((std::size_t{1} << split) - 1);
  return PwaMap::conic_split(basis, plus, minus, labels);
}

template <class Gen>
PwaMap random_certified(CounterRng& rng, Gen&& gen) {
  for (;;) {
    PwaMap map = gen(rng);
    if (check_invertibility(map).invertible) return map;
  }
}

/// Preimage census of a target by damped Newton from many random starts, using
/// only evaluate/jacobian_at. Independent of the regime-enumeration inverse.
struct PreimageCensus {
  std::vector<Vector> roots;
};

inline PreimageCensus newton_census(const PwaMap& map, const Vector& w, CounterRng& rng, int starts = 24,
                                    double spread = 4.0) {
  PreimageCensus census;
  const auto p = static_cast<Eigen::Index>(map.dim());
  const double scale = std::max(1.0, w.norm());
  for (int s = 0; s < starts; ++s) {
    Vector z = random_vector(rng, p, spread * scale);
    for (int it = 0; it < 60; ++it) {
      const Vector r = map.evaluate(z) - w;
      if (r.norm() <= 1e-11 * scale) break;
      const Matrix& jac = map.jacobian_at(z);
      Eigen::FullPivLU<Matrix> lu(jac);
      if (!lu.isInvertible()) break;
      const Vector step = lu.solve(r);
      double t = 1.0;
      Vector next = z - step;
      while (t > 1e-4 && (map.evaluate(next) - w).norm() >= r.norm()) {
        t *= 0.5;
        next = z - t * step;
      }
      z = next;
    }
    if ((map.evaluate(z) - w).norm() > 1e-9 * scale) continue;
    bool fresh = true;
    for (const auto& root : census.roots)
      if ((root - z).norm() <= 1e-6 * std::max(1.0, z.norm())) fresh = false;
    if (fresh) census.roots.push_back(z);
  }
  return census;
}

/// Random point on one of the partition's boundary hyperplanes.
inline Vector boundary_point(const PwaMap& map, CounterRng& rng, double spread) {
  const auto p = static_cast<Eigen::Index>(map.dim());
  const Vector z = random_vector(rng, p, spread);
  const auto& part = map.partition();
  if (part.is_threshold()) {
    const auto& t = part.threshold_data();
    if (t.thresholds.empty()) return z;
    const double tau = t.thresholds[static_cast<std::size_t>(rng.uniform() * t.thresholds.size())];
    return z + (tau - t.direction.dot(z)) / t.direction.squaredNorm() * t.direction;
  }
  const Vector a = part.conic_data().basis.row(static_cast<Eigen::Index>(rng.uniform() * p)).transpose();
  return z - a.dot(z) / a.squaredNorm() * a;
}

/// Sampling verdict on global invertibility: every probed target must have exactly
/// one preimage, and no random pair may collide. Half the targets sit next to the
/// image of a regime boundary, where a fold would show up.
inline bool sampled_invertible(const PwaMap& map, CounterRng& rng, int targets, int pairs) {
  const auto p = static_cast<Eigen::Index>(map.dim());
  for (int k = 0; k < pairs; ++k) {
    const Vector x = random_vector(rng, p, 3.0);
    const Vector y = random_vector(rng, p, 3.0);
    if ((map.evaluate(x) - map.evaluate(y)).norm() <= 1e-12 * (1.0 + (x - y).norm())) return false;
  }
  for (int k = 0; k < targets; ++k) {
    const Vector w = k % 2 ? map.evaluate(random_vector(rng, p, 2.0)) + random_vector(rng, p, 2.0)
                           : map.evaluate(boundary_point(map, rng, 2.0)) + random_vector(rng, p, 0.2);
    if (newton_census(map, w, rng).roots.size() != 1) return false;
  }
  return true;
}

/// Continuous map on a threshold partition: base slope plus increments m_l a'.
inline PwaMap random_map_on(CounterRng& rng, const RegimePartition& partition, double slope_scale,
                            double kink_scale, const Matrix& shift) {
  const auto& part = partition.threshold_data();
  const auto p = static_cast<Eigen::Index>(partition.dim());
  std::vector<AffinePiece> pieces;
  pieces.push_back({Vector::Zero(p), random_matrix(rng, p, p, slope_scale) + shift});
  for (std::size_t l = 1; l < partition.num_regimes(); ++l) {
    const Vector m = random_vector(rng, p, kink_scale);
    const auto& prev = pieces.back();
    pieces.push_back({prev.intercept - part.thresholds[l - 1] * m, prev.matrix + m * part.direction.transpose()});
  }
  return PwaMap::on_partition(partition, std::move(pieces));
}

/// Random stable-ish threshold SVAR with certified f0 and zero f0 intercept at the origin regime.
inline PwaSvarModel random_svar(CounterRng& rng, Eigen::Index p, std::size_t k, std::size_t regimes,
                                double lag_scale = 0.15) {
  Vector a = random_vector(rng, p);
  a /= a.norm();
  std::vector<double> taus;
  for (std::size_t l = 1; l < regimes; ++l) taus.push_back(0.5 * rng.normal());
  std::sort(taus.begin(), taus.end());
  const RegimePartition part = RegimePartition::threshold(a, taus);
  for (;;) {
    PwaMap f0 = random_map_on(rng, part, 0.4, 0.6, Matrix::Identity(p, p));
    if (!check_invertibility(f0).invertible) continue;
    std::vector<PwaMap> lags;
    for (std::size_t i = 0; i < k; ++i) lags.push_back(random_map_on(rng, part, lag_scale, lag_scale, Matrix::Zero(p, p)));
    return PwaSvarModel(random_vector(rng, p, 0.3), std::move(f0), std::move(lags));
  }
}


/// Two-regime bivariate spec with k = 2 lags, threshold on the first variable at 0,
/// all maps regime varying.
inline ModelSpec phillips_spec() {
  ModelSpec spec;
  spec.p = 2;
  spec.k = 2;
  spec.threshold_variable = 0;
  spec.thresholds = {0.0};
  spec.regime_varying = {true, true, true};
  return spec;
}

/// Phillips-curve DGP: inflation loads on the first variable with slope kappa_slack
/// below the threshold and ratio * kappa_slack above it.
inline Vector phillips_truth(double kappa_slack = 0.5, double ratio = 4.0) {
  const ModelSpec spec = phillips_spec();
  const RegimePartition part = spec.partition();
  Matrix b0(2, 2), b0t(2, 2);
  b0 << 1.0, 0.0, -kappa_slack, 1.0;
  b0t << 1.0, 0.0, -ratio * kappa_slack, 1.0;
  Matrix l1(2, 2), l1t(2, 2), l2(2, 2), l2t(2, 2);
  l1 << 0.5, 0.0, 0.1, 0.4;
  l1t << 0.6, 0.0, 0.15, 0.4;
  l2 << 0.2, 0.0, 0.0, 0.1;
  l2t << 0.15, 0.0, 0.05, 0.1;
  auto on = [&](const Matrix& lo, const Matrix& hi) {
    return PwaMap::on_partition(part, {{Vector::Zero(2), lo}, {Vector::Zero(2), hi}});
  };
  const PwaSvarModel model(Vector{{0.0, 0.2}}, on(b0, b0t), {on(l1, l1t), on(l2, l2t)});
  return pack(spec, model);
}

/// T rows simulated after a burn-in of 200 periods.
inline Matrix simulate_data(const PwaSvarModel& model, std::size_t periods, std::uint64_t seed,
                            std::size_t burn_in = 200) {
  const std::vector<Vector> init(model.lags_count(), Vector::Zero(static_cast<Eigen::Index>(model.dim())));
  const SimulationResult r = simulate(model, init, periods + burn_in, seed);
  return r.path.bottomRows(static_cast<Eigen::Index>(periods));
}

struct LinearMl {
  Matrix a;                 // structural impact, lower triangular
  std::vector<Matrix> lag;  // structural lag matrices
  Vector c;
  double loglik;
};

// Closed-form Gaussian ML of a recursive linear SVAR: OLS per equation, Cholesky of
// the residual covariance.
inline LinearMl linear_ml(const Matrix& data, std::size_t k) {
  const auto p = data.cols();
  const auto n = data.rows() - static_cast<Eigen::Index>(k);
  Matrix x(n, 1 + static_cast<Eigen::Index>(k) * p);
  x.col(0).setOnes();
  for (std::size_t i = 1; i <= k; ++i)
    x.middleCols(1 + static_cast<Eigen::Index>(i - 1) * p, p) = data.middleRows(static_cast<Eigen::Index>(k - i), n);
  const Matrix y = data.bottomRows(n);
  const Matrix b = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  const Matrix u = y - x * b;
  const Matrix sigma = u.transpose() * u / static_cast<double>(n);
  const Matrix l = sigma.llt().matrixL();
  LinearMl out;
  out.a = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(p, p));
  out.c = out.a * b.row(0).transpose();
  for (std::size_t i = 1; i <= k; ++i)
    out.lag.push_back(out.a * b.middleRows(1 + static_cast<Eigen::Index>(i - 1) * p, p).transpose());
  out.loglik = -0.5 * static_cast<double>(n * p) * (std::log(2.0 * std::numbers::pi) + 1.0) -
               0.5 * static_cast<double>(n) * std::log(sigma.determinant());
  return out;
}

}  // namespace pwasvar::testing
