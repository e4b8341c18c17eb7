#include "pwasvar/pwa_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pwasvar/error.hpp"
#include "pwasvar/rng.hpp"

namespace pwasvar {

namespace {

constexpr double kDetTolerance = 1e-10;
constexpr double kContinuityTolerance = 1e-10;
constexpr double kBoundaryTolerance = 1e-10;

void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorKind::InvalidArgument, message);
}

std::size_t label_count(const std::vector<std::size_t>& labels) {
  std::vector<bool> seen;
  for (std::size_t l : labels) {
    if (l >= seen.size()) seen.resize(l + 1, false);
    seen[l] = true;
  }
  require(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }),
          "regime labels must cover 1..L without gaps");
  return seen.size();
}

// Column i of the split matrix for pattern m.
Matrix pattern_matrix(const Matrix& plus, const Matrix& minus, std::size_t pattern) {
  Matrix psi(plus.rows(), plus.cols());
  for (Eigen::Index i = 0; i < plus.cols(); ++i) {
    psi.col(i) = ((pattern >> i) & 1u) ? plus.col(i) : minus.col(i);
  }
  return psi;
}

double scale_of(const PwaMap& map) {
  double s = 0.0;
  for (const auto& r : map.regimes()) s = std::max(s, operator_norm(r.matrix));
  return s;
}

}  // namespace

// ---------------------------------------------------------------- partition

RegimePartition RegimePartition::threshold(Vector direction, std::vector<double> thresholds) {
  require(direction.size() > 0, "threshold direction must be non-empty");
  require(direction.norm() > 0.0, "threshold direction must be nonzero");
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    require(thresholds[i - 1] < thresholds[i], "thresholds must be strictly increasing");
  }
  for (double t : thresholds) require(std::isfinite(t), "thresholds must be finite");
  const std::size_t l = thresholds.size() + 1;
  return RegimePartition(ThresholdPartition{std::move(direction), std::move(thresholds)}, l);
}

RegimePartition RegimePartition::conic(Matrix basis, std::vector<std::size_t> pattern_labels) {
  require(basis.rows() > 0 && basis.rows() == basis.cols(), "conic basis must be square");
  const auto p = static_cast<std::size_t>(basis.rows());
  require(p < 8 * sizeof(std::size_t) - 1, "conic dimension too large to enumerate");
  const std::size_t patterns = std::size_t{1} << p;
  if (pattern_labels.empty()) {
    pattern_labels.resize(patterns);
    for (std::size_t m = 0; m < patterns; ++m) pattern_labels[m] = m;
  }
  require(pattern_labels.size() == patterns, "sign-pattern label map must list all 2^p patterns");
  const double scale = std::max(1.0, operator_norm(basis));
  require(std::abs(basis.determinant()) > kDetTolerance * std::pow(scale, static_cast<double>(p)),
          "conic basis must be invertible");
  const std::size_t l = label_count(pattern_labels);
  return RegimePartition(ConicPartition{std::move(basis), std::move(pattern_labels)}, l);
}

RegimePartition RegimePartition::whole_space(std::size_t p) {
  return threshold(Vector::Unit(static_cast<Eigen::Index>(p), 0), {});
}

std::size_t RegimePartition::dim() const {
  if (is_threshold()) return static_cast<std::size_t>(threshold_data().direction.size());
  return static_cast<std::size_t>(conic_data().basis.rows());
}

std::size_t RegimePartition::pattern_of(const Vector& z) const {
  const Vector y = conic_data().basis * z;
  std::size_t m = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) >= 0.0) m |= std::size_t{1} << i;
  }
  return m;
}

std::size_t RegimePartition::regime_of(const Vector& z) const {
  if (is_threshold()) {
    const auto& t = threshold_data();
    const double s = t.direction.dot(z);
    // Half-open bands (tau_{l-1}, tau_l]: count thresholds strictly below s.
    return static_cast<std::size_t>(
        std::lower_bound(t.thresholds.begin(), t.thresholds.end(), s) - t.thresholds.begin());
  }
  return conic_data().pattern_labels[pattern_of(z)];
}

double RegimePartition::boundary_distance(const Vector& z) const {
  double best = std::numeric_limits<double>::infinity();
  if (is_threshold()) {
    const auto& t = threshold_data();
    const double s = t.direction.dot(z);
    for (double tau : t.thresholds) best = std::min(best, std::abs(s - tau));
  } else {
    const Vector y = conic_data().basis * z;
    best = y.cwiseAbs().minCoeff();
  }
  return best;
}

bool RegimePartition::operator==(const RegimePartition& other) const {
  if (is_threshold() != other.is_threshold()) return false;
  if (is_threshold()) {
    const auto& a = threshold_data();
    const auto& b = other.threshold_data();
    return a.direction.size() == b.direction.size() && a.direction == b.direction &&
           a.thresholds == b.thresholds;
  }
  const auto& a = conic_data();
  const auto& b = other.conic_data();
  return a.basis.rows() == b.basis.rows() && a.basis == b.basis && a.pattern_labels == b.pattern_labels;
}

// ---------------------------------------------------------------- map

PwaMap::PwaMap(RegimePartition partition, std::vector<AffinePiece> regimes)
    : partition_(std::move(partition)), regimes_(std::move(regimes)) {
  const auto p = static_cast<Eigen::Index>(partition_.dim());
  require(regimes_.size() == partition_.num_regimes(), "number of regimes does not match partition");
  for (const auto& r : regimes_) {
    require(r.matrix.rows() == p && r.matrix.cols() == p, "regime matrix has wrong dimension");
    require(r.intercept.size() == p, "regime intercept has wrong dimension");
  }
}

void PwaMap::factorize() {
  lus_.clear();
  lus_.reserve(regimes_.size());
  for (const auto& r : regimes_) lus_.emplace_back(r.matrix);
}

PwaMap PwaMap::threshold_affine(ThresholdPartition partition, std::vector<AffinePiece> regimes) {
  PwaMap map(RegimePartition::threshold(std::move(partition.direction), std::move(partition.thresholds)),
             std::move(regimes));
  map.factorize();
  return map;
}

PwaMap PwaMap::affine(Vector intercept, Matrix matrix) {
  const auto p = static_cast<std::size_t>(matrix.rows());
  return on_partition(RegimePartition::whole_space(p), {AffinePiece{std::move(intercept), std::move(matrix)}});
}

PwaMap PwaMap::conic_split(Matrix basis, Matrix psi_plus, Matrix psi_minus,
                           std::vector<std::size_t> pattern_labels) {
  auto partition = RegimePartition::conic(std::move(basis), std::move(pattern_labels));
  const auto p = static_cast<Eigen::Index>(partition.dim());
  require(psi_plus.rows() == p && psi_plus.cols() == p && psi_minus.rows() == p && psi_minus.cols() == p,
          "split columns have wrong dimension");
  const auto& conic = partition.conic_data();
  std::vector<AffinePiece> regimes(partition.num_regimes());
  std::vector<bool> filled(regimes.size(), false);
  for (std::size_t m = 0; m < conic.pattern_labels.size(); ++m) {
    const std::size_t l = conic.pattern_labels[m];
    if (filled[l]) continue;
    regimes[l] = AffinePiece{Vector::Zero(p), pattern_matrix(psi_plus, psi_minus, m) * conic.basis};
    filled[l] = true;
  }
  PwaMap map(std::move(partition), std::move(regimes));
  map.psi_plus_ = std::move(psi_plus);
  map.psi_minus_ = std::move(psi_minus);
  map.factorize();
  return map;
}

PwaMap PwaMap::conic_from_regimes(Matrix basis, std::vector<std::size_t> pattern_labels,
                                  std::vector<Matrix> matrices) {
  auto partition = RegimePartition::conic(std::move(basis), std::move(pattern_labels));
  const auto p = static_cast<Eigen::Index>(partition.dim());
  require(matrices.size() == partition.num_regimes(), "number of regimes does not match partition");
  const auto& conic = partition.conic_data();
  const Matrix basis_inv = conic.basis.inverse();
  Matrix plus = Matrix::Zero(p, p);
  Matrix minus = Matrix::Zero(p, p);
  std::vector<int> n_plus(static_cast<std::size_t>(p), 0);
  std::vector<int> n_minus(static_cast<std::size_t>(p), 0);
  for (std::size_t m = 0; m < conic.pattern_labels.size(); ++m) {
    const Matrix& phi = matrices[conic.pattern_labels[m]];
    require(phi.rows() == p && phi.cols() == p, "regime matrix has wrong dimension");
    const Matrix psi = phi * basis_inv;
    for (Eigen::Index i = 0; i < p; ++i) {
      if ((m >> i) & 1u) {
        plus.col(i) += psi.col(i);
        ++n_plus[static_cast<std::size_t>(i)];
      } else {
        minus.col(i) += psi.col(i);
        ++n_minus[static_cast<std::size_t>(i)];
      }
    }
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    plus.col(i) /= n_plus[static_cast<std::size_t>(i)];
    minus.col(i) /= n_minus[static_cast<std::size_t>(i)];
  }
  std::vector<AffinePiece> regimes;
  regimes.reserve(matrices.size());
  for (auto& m : matrices) regimes.push_back(AffinePiece{Vector::Zero(p), std::move(m)});
  PwaMap map(std::move(partition), std::move(regimes));
  map.psi_plus_ = std::move(plus);
  map.psi_minus_ = std::move(minus);
  map.factorize();
  return map;
}

PwaMap PwaMap::on_partition(const RegimePartition& partition, std::vector<AffinePiece> regimes) {
  if (partition.is_threshold()) {
    return threshold_affine(partition.threshold_data(), std::move(regimes));
  }
  for (const auto& r : regimes) {
    require(r.intercept.size() == 0 || r.intercept.isZero(0.0),
            "piecewise-linear (conic) maps have zero intercepts");
  }
  std::vector<Matrix> matrices;
  matrices.reserve(regimes.size());
  for (auto& r : regimes) matrices.push_back(std::move(r.matrix));
  const auto& conic = partition.conic_data();
  return conic_from_regimes(conic.basis, conic.pattern_labels, std::move(matrices));
}

Vector PwaMap::evaluate_in(std::size_t regime, const Vector& z) const {
  const auto& r = regimes_[regime];
  return r.intercept + r.matrix * z;
}

Vector PwaMap::evaluate(const Vector& z) const { return evaluate_in(regime_of(z), z); }

PwaMap PwaMap::premultiplied(const Matrix& q) const {
  PwaMap out = *this;
  for (auto& r : out.regimes_) {
    r.intercept = q * r.intercept;
    r.matrix = q * r.matrix;
  }
  if (psi_plus_.size() > 0) {
    out.psi_plus_ = q * psi_plus_;
    out.psi_minus_ = q * psi_minus_;
  }
  out.factorize();
  return out;
}

// ---------------------------------------------------------------- continuity

ContinuityReport validate_continuity(const PwaMap& map) {
  ContinuityReport report;
  const double tol = kContinuityTolerance * std::max(1.0, scale_of(map));
  const auto& partition = map.partition();
  if (partition.is_threshold()) {
    const auto& t = partition.threshold_data();
    const Vector& a = t.direction;
    for (std::size_t l = 1; l < map.num_regimes(); ++l) {
      const Matrix diff = map.regime(l).matrix - map.regime(l - 1).matrix;
      const Vector m = diff * a / a.squaredNorm();
      const double matrix_residual = (diff - m * a.transpose()).norm();
      const Vector jump = map.regime(l).intercept - map.regime(l - 1).intercept;
      const double intercept_residual = (jump + t.thresholds[l - 1] * m).norm();
      if (matrix_residual > tol || intercept_residual > tol) {
        report.ok = false;
        report.violations.push_back({l - 1, l, matrix_residual, intercept_residual});
      }
    }
    return report;
  }
  // Conic: each label's matrix must coincide with the split form on every
  // pattern carrying that label.
  const auto& conic = partition.conic_data();
  for (std::size_t m = 0; m < conic.pattern_labels.size(); ++m) {
    const std::size_t l = conic.pattern_labels[m];
    const Matrix canonical = pattern_matrix(map.psi_plus(), map.psi_minus(), m) * conic.basis;
    const double matrix_residual = (map.regime(l).matrix - canonical).norm();
    const double intercept_residual = map.regime(l).intercept.norm();
    if (matrix_residual > tol || intercept_residual > tol) {
      report.ok = false;
      report.violations.push_back({l, m, matrix_residual, intercept_residual});
    }
  }
  return report;
}

void require_continuous(const PwaMap& map) {
  const auto report = validate_continuity(map);
  if (report.ok) return;
  const auto& v = report.violations.front();
  std::ostringstream os;
  os << "regimes " << v.lower_regime + 1 << "/" << v.upper_regime + 1
     << ": matrix residual " << v.matrix_residual << ", intercept residual " << v.intercept_residual;
  throw Error(ErrorKind::ContinuityViolation, os.str());
}

// ---------------------------------------------------------------- invertibility

InvertibilityCertificate check_invertibility(const PwaMap& map, const CertificateOptions& options) {
  InvertibilityCertificate cert;
  const double p = static_cast<double>(map.dim());
  if (map.partition().is_threshold()) {
    for (const auto& r : map.regimes()) cert.determinants.push_back(r.matrix.determinant());
  } else {
    if (map.dim() > options.max_conic_dim) {
      throw Error(ErrorKind::DimensionTooLarge,
                  "conic certificate enumerates 2^p sign patterns; p = " + std::to_string(map.dim()) +
                      " exceeds cap " + std::to_string(options.max_conic_dim));
    }
    cert.per_pattern = true;
    const std::size_t patterns = std::size_t{1} << map.dim();
    cert.determinants.reserve(patterns);
    for (std::size_t m = 0; m < patterns; ++m) {
      cert.determinants.push_back(pattern_matrix(map.psi_plus(), map.psi_minus(), m).determinant());
    }
  }
  double scale = scale_of(map);
  if (map.partition().is_conic()) {
    scale = std::max(scale, std::max(operator_norm(map.psi_plus()), operator_norm(map.psi_minus())));
  }
  const double tol = kDetTolerance * std::pow(std::max(scale, 1e-300), p);
  const double first = cert.determinants.front();
  const int reference = std::abs(first) > tol ? (first > 0 ? 1 : -1) : 0;
  for (std::size_t i = 0; i < cert.determinants.size(); ++i) {
    const double d = cert.determinants[i];
    const int s = std::abs(d) > tol ? (d > 0 ? 1 : -1) : 0;
    if (s == 0 || s != reference) cert.failing.push_back(i);
  }
  cert.invertible = reference != 0 && cert.failing.empty();
  cert.sign = cert.invertible ? reference : 0;
  return cert;
}

Vector invert(const PwaMap& map, const Vector& w) {
  struct Candidate {
    std::size_t label;
    Vector z;
  };
  std::vector<Candidate> accepted;
  const auto& partition = map.partition();
  if (partition.is_threshold()) {
    const auto& t = partition.threshold_data();
    for (std::size_t l = 0; l < map.num_regimes(); ++l) {
      if (map.lu(l).rcond() < 1e-14) continue;
      Vector z = map.lu(l).solve(w - map.regime(l).intercept);
      const double s = t.direction.dot(z);
      const double tol = kBoundaryTolerance * std::max(1.0, std::abs(s));
      const bool above_lower = l == 0 || s > t.thresholds[l - 1] - tol;
      const bool below_upper = l + 1 == map.num_regimes() || s <= t.thresholds[l] + tol;
      if (above_lower && below_upper) accepted.push_back({l, std::move(z)});
    }
  } else {
    const auto& conic = partition.conic_data();
    const std::size_t patterns = std::size_t{1} << map.dim();
    const Eigen::PartialPivLU<Matrix> basis_lu(conic.basis);
    for (std::size_t m = 0; m < patterns; ++m) {
      const Eigen::PartialPivLU<Matrix> lu(pattern_matrix(map.psi_plus(), map.psi_minus(), m));
      if (lu.rcond() < 1e-14) continue;
      const Vector y = lu.solve(w);
      const double tol = kBoundaryTolerance * std::max(1.0, y.cwiseAbs().maxCoeff());
      bool match = true;
      for (Eigen::Index i = 0; i < y.size() && match; ++i) {
        const bool plus = (m >> i) & 1u;
        match = plus ? y(i) >= -tol : y(i) < tol;
      }
      if (match) accepted.push_back({conic.pattern_labels[m], basis_lu.solve(y)});
    }
  }
  if (accepted.empty()) throw Error(ErrorKind::NotInvertible, "no regime accepts the target");
  std::sort(accepted.begin(), accepted.end(),
            [](const Candidate& a, const Candidate& b) { return a.label < b.label; });
  const Vector& best = accepted.front().z;
  for (std::size_t i = 1; i < accepted.size(); ++i) {
    const double gap = (accepted[i].z - best).norm();
    if (gap > 1e-8 * std::max(1.0, best.norm())) {
      throw Error(ErrorKind::AmbiguousInverse,
                  "regimes " + std::to_string(accepted.front().label + 1) + " and " +
                      std::to_string(accepted[i].label + 1) + " both accept the target");
    }
  }
  return best;
}

// ---------------------------------------------------------------- segments

SegmentDecomposition segment_decomposition(const PwaMap& map, const Vector& from, const Vector& to) {
  SegmentDecomposition out;
  const Vector step = to - from;
  if (step.norm() == 0.0) {
    const std::size_t l = map.regime_of(from);
    out.degenerate = true;
    out.breakpoints = {0.0, 1.0};
    out.weights = {1.0};
    out.labels = {l};
    out.effective = map.regime(l).matrix;
    return out;
  }
  std::vector<double> cuts;
  auto add_crossing = [&](double start, double end, double level) {
    const double slope = end - start;
    if (slope == 0.0) return;
    const double d = (level - start) / slope;
    if (d > 0.0 && d < 1.0) cuts.push_back(d);
  };
  const auto& partition = map.partition();
  if (partition.is_threshold()) {
    const auto& t = partition.threshold_data();
    const double s0 = t.direction.dot(from);
    const double s1 = t.direction.dot(to);
    for (double tau : t.thresholds) add_crossing(s0, s1, tau);
  } else {
    const Matrix& basis = partition.conic_data().basis;
    const Vector y0 = basis * from;
    const Vector y1 = basis * to;
    for (Eigen::Index i = 0; i < y0.size(); ++i) add_crossing(y0(i), y1(i), 0.0);
  }
  std::sort(cuts.begin(), cuts.end());
  out.breakpoints.push_back(0.0);
  for (double c : cuts) {
    if (c - out.breakpoints.back() > 1e-15) out.breakpoints.push_back(c);
  }
  if (1.0 - out.breakpoints.back() <= 1e-15 && out.breakpoints.size() > 1) out.breakpoints.pop_back();
  out.breakpoints.push_back(1.0);

  const auto p = static_cast<Eigen::Index>(map.dim());
  out.effective = Matrix::Zero(p, p);
  for (std::size_t i = 0; i + 1 < out.breakpoints.size(); ++i) {
    const double w = out.breakpoints[i + 1] - out.breakpoints[i];
    const double mid = 0.5 * (out.breakpoints[i] + out.breakpoints[i + 1]);
    const std::size_t l = map.regime_of(from + mid * step);
    out.weights.push_back(w);
    out.labels.push_back(l);
    out.effective += w * map.regime(l).matrix;
  }
  out.residual = (map.evaluate(to) - map.evaluate(from) - out.effective * step).norm();
  return out;
}

double lipschitz_upper_bound(const PwaMap& map) { return scale_of(map); }

double sampled_lower_lipschitz(const PwaMap& map, std::size_t pairs, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  const auto p = static_cast<Eigen::Index>(map.dim());
  double best = std::numeric_limits<double>::infinity();
  Vector x(p), y(p);
  for (std::size_t k = 0; k < pairs; ++k) {
    for (Eigen::Index i = 0; i < p; ++i) {
      x(i) = 3.0 * rng.normal();
      y(i) = 3.0 * rng.normal();
    }
    const double d = (x - y).norm();
    if (d == 0.0) continue;
    best = std::min(best, (map.evaluate(x) - map.evaluate(y)).norm() / d);
  }
  return best;
}

}  // namespace pwasvar
