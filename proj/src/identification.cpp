#include "pwasvar/identification.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pwasvar/error.hpp"
#include "pwasvar/rng.hpp"

namespace pwasvar {

namespace {

void require_orthogonal(const Matrix& q, std::size_t p) {
  if (q.rows() != static_cast<Eigen::Index>(p) || q.cols() != static_cast<Eigen::Index>(p))
    throw Error(ErrorKind::InvalidArgument, "rotation has the wrong size");
  if (!is_orthogonal(q, 1e-8)) throw Error(ErrorKind::NotOrthogonal, "matrix is not orthogonal within 1e-8");
}

double relative_gap(const Vector& x, const Vector& y) { return (x - y).norm() / std::max(1.0, y.norm()); }

}  // namespace

RotationNormalization orthogonal_lower_factor(const Matrix& d) {
  const auto p = d.rows();
  // QR of the row- and column-reversed matrix: J D J = Qr R gives D = (J Qr J)(J R J)
  // with J R J lower triangular.
  const Matrix rev = d.reverse();
  Eigen::HouseholderQR<Matrix> qr(rev);
  const Matrix qr_q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  Matrix qt = qr_q.reverse();
  Matrix l = r.reverse();
  for (Eigen::Index i = 0; i < p; ++i) {
    if (l(i, i) < 0.0) {
      l.row(i) *= -1.0;
      qt.col(i) *= -1.0;
    }
  }
  RotationNormalization out;
  out.q = qt.transpose();
  out.l = l.triangularView<Eigen::Lower>();
  return out;
}

PwaSvarModel rotate_model(const PwaSvarModel& model, const Matrix& q) {
  require_orthogonal(q, model.dim());
  SkedasticSpec shocks = model.shocks();
  for (std::size_t g = 0; g < shocks.sd.size(); ++g) {
    const Vector var = shocks.sd[g].array().square();
    if (!is_diagonalizing_rotation(q, var))
      throw Error(ErrorKind::SkedasticNotDiagonalizable,
                  "Q sigma^2 Q' is not diagonal for skedastic group " + std::to_string(g));
    shocks.sd[g] = (q * var.asDiagonal() * q.transpose()).diagonal().cwiseSqrt();
  }
  std::vector<PwaMap> lags;
  for (const auto& f : model.lag_maps()) lags.push_back(f.premultiplied(q));
  return PwaSvarModel(q * model.intercept(), model.f0().premultiplied(q), std::move(lags), std::move(shocks));
}

ReducedForm orthogonal_reduced_form(const PwaSvarModel& model, const Vector& z0) {
  if (static_cast<std::size_t>(z0.size()) != model.dim())
    throw Error(ErrorKind::InvalidArgument, "anchor has the wrong dimension");
  if (model.partition().num_regimes() > 1 &&
      model.partition().boundary_distance(z0) <= 1e-9 * std::max(1.0, z0.norm()))
    throw Error(ErrorKind::BoundaryAnchor, "anchor lies on a regime boundary");
  RotationNormalization norm = orthogonal_lower_factor(model.f0().jacobian_at(z0));
  norm.anchor = z0;
  PwaSvarModel rotated = rotate_model(model, norm.q);
  return ReducedForm{std::move(rotated), std::move(norm)};
}

std::vector<Vector> rotation_probes(const PwaSvarModel& model, std::uint64_t seed) {
  const std::size_t p = model.dim(), regimes = model.num_regimes();
  std::vector<std::size_t> hits(regimes, 0);
  std::vector<Vector> probes;
  CounterRng rng(seed, 0);
  double spread = 1.0;
  for (std::size_t attempt = 0; attempt < 200000; ++attempt) {
    bool done = true;
    for (auto h : hits) done &= h >= p + 1;
    if (done && probes.size() >= p * (p + 1) / 2) break;
    if (attempt % 1000 == 999) spread *= 2.0;
    Vector x(p);
    for (std::size_t i = 0; i < p; ++i) x[static_cast<Eigen::Index>(i)] = spread * rng.normal();
    const std::size_t l = model.partition().regime_of(x);
    if (hits[l] < p + 1 || probes.size() < p * (p + 1) / 2) {
      ++hits[l];
      probes.push_back(x);
    }
  }
  return probes;
}

RotationMatch find_rotation(const PwaSvarModel& a, const PwaSvarModel& b, const std::vector<Vector>& probes) {
  const std::size_t p = a.dim();
  if (b.dim() != p || b.lags_count() != a.lags_count() || b.num_regimes() != a.num_regimes())
    throw Error(ErrorKind::InvalidArgument, "models differ in dimension, lag order or regime count");
  if (probes.size() < p * (p + 1) / 2)
    throw Error(ErrorKind::InsufficientProbes, "need at least " + std::to_string(p * (p + 1) / 2) + " probes");
  std::vector<bool> seen(a.num_regimes(), false);
  for (const auto& x : probes) seen[a.partition().regime_of(x)] = true;
  for (bool s : seen)
    if (!s) throw Error(ErrorKind::InsufficientProbes, "probes do not visit every regime");

  const auto n = static_cast<Eigen::Index>(probes.size());
  Matrix xa(static_cast<Eigen::Index>(p), n), xb(static_cast<Eigen::Index>(p), n);
  double spread = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    xa.col(j) = a.f0().evaluate(probes[static_cast<std::size_t>(j)]);
    xb.col(j) = b.f0().evaluate(probes[static_cast<std::size_t>(j)]);
    spread = std::max(spread, probes[static_cast<std::size_t>(j)].norm());
  }
  Eigen::JacobiSVD<Matrix> svd(xb * xa.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  RotationMatch out;
  out.q = svd.matrixU() * svd.matrixV().transpose();

  // Validation at fresh points, independent of the probes.
  CounterRng rng(0x5eed, probes.size());
  double worst = relative_gap(out.q * a.intercept(), b.intercept());
  for (int j = 0; j < 200; ++j) {
    Vector x(p);
    for (std::size_t i = 0; i < p; ++i) x[static_cast<Eigen::Index>(i)] = spread * rng.normal();
    worst = std::max(worst, relative_gap(out.q * a.f0().evaluate(x), b.f0().evaluate(x)));
    for (std::size_t i = 1; i <= a.lags_count(); ++i)
      worst = std::max(worst, relative_gap(out.q * a.lag(i).evaluate(x), b.lag(i).evaluate(x)));
  }
  const auto& sa = a.shocks();
  const auto& sb = b.shocks();
  if (sa.num_groups() != sb.num_groups()) {
    worst = std::max(worst, 1.0);
  } else if (sa.kind != SkedasticSpec::Kind::Homoskedastic || sb.kind != SkedasticSpec::Kind::Homoskedastic) {
    for (std::size_t g = 0; g < sa.num_groups(); ++g) {
      const Vector va = sa.kind == SkedasticSpec::Kind::Homoskedastic ? Vector(Vector::Ones(p))
                                                                       : Vector(sa.sd[g].array().square());
      const Vector vb = sb.kind == SkedasticSpec::Kind::Homoskedastic ? Vector(Vector::Ones(p))
                                                                       : Vector(sb.sd[g].array().square());
      const Matrix rotated = out.q * va.asDiagonal() * out.q.transpose();
      worst = std::max(worst, (rotated - Matrix(vb.asDiagonal())).norm() / std::max(1.0, vb.norm()));
    }
  }
  out.residual = worst;
  out.equivalent = worst <= 1e-7;
  return out;
}

InstrumentShock instrument_q1(const Matrix& residuals, const Vector& instrument) {
  const auto t = residuals.rows();
  if (instrument.size() != t) throw Error(ErrorKind::InvalidArgument, "instrument length differs from residuals");
  if (t < 30) throw Error(ErrorKind::InvalidArgument, "instrument_q1 needs at least 30 observations");
  const Matrix uw = residuals.array().colwise() * instrument.array();
  const Vector delta = uw.colwise().mean().transpose();
  const double norm = delta.norm();
  const double td = static_cast<double>(t);
  Vector loo(t);
  for (Eigen::Index i = 0; i < t; ++i) loo[i] = ((td * delta - uw.row(i).transpose()) / (td - 1.0)).norm();
  const double se = std::sqrt((td - 1.0) / td * (loo.array() - loo.mean()).square().sum());
  const double strength = se > 0.0 ? norm / se : (norm > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  if (!(strength >= 3.0))
    throw Error(ErrorKind::WeakInstrument, "instrument covariance is " + std::to_string(strength) +
                                               " jackknife standard errors from zero");
  InstrumentShock out;
  out.q1 = delta / norm;
  out.shock = residuals * out.q1;
  out.strength = strength;
  return out;
}

HeteroClass hetero_identification_class(const std::vector<Vector>& variances) {
  HeteroClass out;
  if (variances.empty()) return out;
  const std::size_t p = static_cast<std::size_t>(variances.front().size());
  auto same = [](double x, double y) { return std::abs(x - y) <= 1e-6 * std::max(std::abs(x), std::abs(y)); };
  std::vector<bool> placed(p, false);
  for (std::size_t i = 0; i < p; ++i) {
    if (placed[i]) continue;
    std::vector<std::size_t> group{i};
    placed[i] = true;
    for (std::size_t j = i + 1; j < p; ++j) {
      if (placed[j]) continue;
      bool equal = true;
      for (const auto& v : variances)
        equal &= same(v[static_cast<Eigen::Index>(i)], v[static_cast<Eigen::Index>(j)]);
      if (equal) {
        group.push_back(j);
        placed[j] = true;
      }
    }
    out.groups.push_back(std::move(group));
  }
  if (out.groups.size() == 1)
    out.kind = HeteroClass::Kind::NoneExtra;
  else if (out.groups.size() == p)
    out.kind = HeteroClass::Kind::SignedPermutation;
  else
    out.kind = HeteroClass::Kind::Block;
  return out;
}

bool is_diagonalizing_rotation(const Matrix& q, const Vector& variances) {
  require_orthogonal(q, static_cast<std::size_t>(variances.size()));
  const Matrix m = q * variances.asDiagonal() * q.transpose();
  const double scale = m.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j && !(std::abs(m(i, j)) < 1e-8 * scale)) return false;
  return true;
}

std::vector<Matrix> admissible_rotations_2d(const Vector& variances, std::size_t angles) {
  if (variances.size() != 2) throw Error(ErrorKind::InvalidArgument, "angle scan needs p = 2");
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < angles; ++i) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(angles);
    Matrix rot(2, 2);
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    const Matrix reflection = rot * Vector{{1.0, -1.0}}.asDiagonal();
    for (const Matrix& q : {rot, reflection})
      if (is_diagonalizing_rotation(q, variances)) out.push_back(q);
  }
  return out;
}

}  // namespace pwasvar
