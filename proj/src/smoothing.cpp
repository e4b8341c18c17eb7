#include "pwasvar/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <gsl/gsl_integration.h>

#include "pwasvar/error.hpp"
#include "pwasvar/rng.hpp"

namespace pwasvar {

namespace {

// Standardized half-width of the kink axis; the Gaussian tail beyond it is < 1e-32.
constexpr double kAxisHalfWidth = 12.0;
constexpr std::size_t kPanelOrder = 10;
constexpr std::size_t kMaxTensorDim = 4;
constexpr std::size_t kMcChunk = 1 << 16;

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Nodes and weights for E g(V), V ~ N(0, 1).
Rule gauss_hermite(std::size_t n) {
  std::unique_ptr<gsl_integration_fixed_workspace, decltype(&gsl_integration_fixed_free)> ws(
      gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, n, 0.0, 1.0, 0.0, 0.0),
      &gsl_integration_fixed_free);
  if (!ws) throw Error(ErrorKind::InvalidArgument, "cannot build Gauss-Hermite rule");
  Rule rule;
  const double* x = gsl_integration_fixed_nodes(ws.get());
  const double* w = gsl_integration_fixed_weights(ws.get());
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes.push_back(std::sqrt(2.0) * x[i]);
    rule.weights.push_back(w[i] / std::sqrt(M_PI));
  }
  return rule;
}

// Composite Gauss-Legendre rule for E g(V) with panels split at the kinks of g
// (in standardized units), so every panel integrates a smooth function.
Rule kink_split_rule(std::vector<double> kinks) {
  std::vector<double> cuts = {-kAxisHalfWidth, kAxisHalfWidth};
  for (double k : kinks)
    if (k > -kAxisHalfWidth && k < kAxisHalfWidth) cuts.push_back(k);
  for (double c = -kAxisHalfWidth + 1.0; c < kAxisHalfWidth; c += 1.0) cuts.push_back(c);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::unique_ptr<gsl_integration_glfixed_table, decltype(&gsl_integration_glfixed_table_free)> table(
      gsl_integration_glfixed_table_alloc(kPanelOrder), &gsl_integration_glfixed_table_free);
  Rule rule;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    if (cuts[c + 1] - cuts[c] < 1e-14) continue;
    for (std::size_t i = 0; i < kPanelOrder; ++i) {
      double x = 0.0, w = 0.0;
      gsl_integration_glfixed_point(cuts[c], cuts[c + 1], i, &x, &w, table.get());
      rule.nodes.push_back(x);
      rule.weights.push_back(w * normal_pdf(x));
    }
  }
  return rule;
}

// Orthonormal frame whose first column is the unit vector e.
Matrix frame_from(const Vector& e) {
  const Matrix column = e;
  Eigen::HouseholderQR<Matrix> qr(column);
  Matrix q = qr.householderQ();
  if (q.col(0).dot(e) < 0) q.col(0) = -q.col(0);
  return q;
}

// One additive piece of the integrand that kinks only along `direction`.
struct KinkTerm {
  Vector direction;            // a (unnormalized)
  std::vector<double> levels;  // kinks where a'x crosses these values
  std::function<Vector(const Vector&)> eval;
};

Vector integrate_term(const KinkTerm& term, double h, const Vector& z, std::size_t nodes) {
  const auto p = static_cast<Eigen::Index>(z.size());
  const double norm = term.direction.norm();
  const Matrix frame = frame_from(term.direction / norm);
  const double s0 = term.direction.dot(z);
  std::vector<double> kinks;
  for (double level : term.levels) kinks.push_back((level - s0) / (h * norm));
  const Rule axis = kink_split_rule(kinks);
  const Rule gh = gauss_hermite(nodes);

  Vector total = Vector::Zero(p);
  std::vector<std::size_t> index(static_cast<std::size_t>(p - 1), 0);
  Vector offset(p);
  for (;;) {
    double w_perp = 1.0;
    offset = z;
    for (Eigen::Index k = 1; k < p; ++k) {
      const std::size_t i = index[static_cast<std::size_t>(k - 1)];
      w_perp *= gh.weights[i];
      offset += h * gh.nodes[i] * frame.col(k);
    }
    for (std::size_t a = 0; a < axis.nodes.size(); ++a) {
      total += (w_perp * axis.weights[a]) * term.eval(offset + h * axis.nodes[a] * frame.col(0));
    }
    // Odometer over the orthogonal axes.
    std::size_t k = 0;
    while (k < index.size() && ++index[k] == nodes) index[k++] = 0;
    if (k == index.size()) break;
  }
  return total;
}

}  // namespace

GaussianKernel::GaussianKernel(double h) : bandwidth(h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::InvalidArgument, "bandwidth must be positive");
}

// ---------------------------------------------------------------- closed form

SmoothedThresholdMap::SmoothedThresholdMap(PwaMap base, GaussianKernel kernel)
    : base_(std::move(base)), bandwidth_(kernel.bandwidth) {
  if (!base_.partition().is_threshold()) {
    throw Error(ErrorKind::NotThresholdAffine, "closed-form smoothing needs a threshold-affine map");
  }
  const auto& part = base_.partition().threshold_data();
  direction_ = part.direction;
  thresholds_ = part.thresholds;
  sigma_ = bandwidth_ * direction_.norm();
  for (std::size_t l = 1; l < base_.num_regimes(); ++l) {
    kinks_.push_back((base_.regime(l).matrix - base_.regime(l - 1).matrix) * direction_ /
                     direction_.squaredNorm());
  }
}

Vector SmoothedThresholdMap::evaluate(const Vector& z) const {
  const double s = direction_.dot(z);
  Vector out = base_.evaluate_in(0, z);
  for (std::size_t j = 0; j < kinks_.size(); ++j) {
    const double d = s - thresholds_[j];
    const double x = d / sigma_;
    out += (d * normal_cdf(x) + sigma_ * normal_pdf(x)) * kinks_[j];
  }
  return out;
}

Matrix SmoothedThresholdMap::jacobian(const Vector& z) const {
  const double s = direction_.dot(z);
  Vector slope = Vector::Zero(direction_.size());
  for (std::size_t j = 0; j < kinks_.size(); ++j) {
    slope += normal_cdf((s - thresholds_[j]) / sigma_) * kinks_[j];
  }
  return base_.regime(0).matrix + slope * direction_.transpose();
}

std::vector<double> SmoothedThresholdMap::hull_weights(const Vector& z) const {
  const double s = direction_.dot(z);
  std::vector<double> mass(kinks_.size() + 2, 0.0);
  mass.front() = 1.0;
  for (std::size_t j = 0; j < kinks_.size(); ++j) mass[j + 1] = normal_cdf((s - thresholds_[j]) / sigma_);
  std::vector<double> mu(base_.num_regimes());
  for (std::size_t l = 0; l < mu.size(); ++l) mu[l] = mass[l] - mass[l + 1];
  return mu;
}

SmoothedThresholdMap smooth_threshold_affine(const PwaMap& map, GaussianKernel kernel) {
  return SmoothedThresholdMap(map, kernel);
}

// ---------------------------------------------------------------- numeric

MonteCarloEstimate smooth_monte_carlo(const PwaMap& map, GaussianKernel kernel, const Vector& z,
                                      std::size_t draws, std::uint64_t seed) {
  const auto p = static_cast<Eigen::Index>(map.dim());
  Vector sum = Vector::Zero(p);
  Vector sum_sq = Vector::Zero(p);
  Vector u(p);
  const std::size_t chunks = (draws + kMcChunk - 1) / kMcChunk;
  for (std::size_t c = 0; c < chunks; ++c) {
    CounterRng rng(seed, c);
    const std::size_t n = std::min(kMcChunk, draws - c * kMcChunk);
    for (std::size_t i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < p; ++k) u(k) = kernel.bandwidth * rng.normal();
      const Vector f = map.evaluate(z + u);
      sum += f;
      sum_sq += f.cwiseAbs2();
    }
  }
  const double n = static_cast<double>(draws);
  MonteCarloEstimate est;
  est.mean = sum / n;
  const Vector var = (sum_sq / n - est.mean.cwiseAbs2()).cwiseMax(0.0) * (n / (n - 1.0));
  est.std_error = (var / n).cwiseSqrt();
  return est;
}

Vector smooth_numeric(const PwaMap& map, GaussianKernel kernel, const Vector& z,
                      const NumericSmoothingOptions& options) {
  if (options.nodes < 8) throw Error(ErrorKind::InvalidArgument, "at least 8 quadrature nodes are required");
  const std::size_t p = map.dim();
  if (p > kMaxTensorDim) {
    if (!options.monte_carlo_fallback) {
      throw Error(ErrorKind::DimensionTooLarge,
                  "tensor quadrature limited to p <= 4; enable the Monte Carlo fallback");
    }
    return smooth_monte_carlo(map, kernel, z, options.mc_draws, options.seed).mean;
  }
  const auto& partition = map.partition();
  if (partition.is_threshold()) {
    const auto& t = partition.threshold_data();
    KinkTerm term{t.direction, t.thresholds, [&map](const Vector& x) { return map.evaluate(x); }};
    return integrate_term(term, kernel.bandwidth, z, options.nodes);
  }
  // Conic maps are additive over the split coordinates y_i = a_i'x; each term
  // kinks only along its own a_i.
  const Matrix& basis = partition.conic_data().basis;
  Vector total = Vector::Zero(static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < basis.rows(); ++i) {
    const Vector a = basis.row(i).transpose();
    const Vector plus = map.psi_plus().col(i);
    const Vector minus = map.psi_minus().col(i);
    KinkTerm term{a, {0.0}, [a, plus, minus](const Vector& x) -> Vector {
                    const double y = a.dot(x);
                    return y >= 0.0 ? Vector(plus * y) : Vector(minus * y);
                  }};
    total += integrate_term(term, kernel.bandwidth, z, options.nodes);
  }
  return total;
}

// ---------------------------------------------------------------- logistic

LogisticTransitionMap::LogisticTransitionMap(double a1, double a2, double scale)
    : a1_(a1), a2_(a2), scale_(scale) {
  if (!(scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "transition scale must be positive");
}

double LogisticTransitionMap::weight(double z) const {
  const double x = z / scale_;
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double LogisticTransitionMap::operator()(double z) const {
  const double f = weight(z);
  return (1.0 - f) * a1_ * z + f * a2_ * z;
}

double LogisticTransitionMap::kink(double z) const { return a1_ * std::min(z, 0.0) + a2_ * std::max(z, 0.0); }

LogisticTransitionMap logistic_transition(double a1, double a2, double scale) {
  return LogisticTransitionMap(a1, a2, scale);
}

MonotonicityReport check_scalar_monotone(const std::function<double(double)>& f, double lo, double hi,
                                         std::size_t n) {
  if (n < 100) throw Error(ErrorKind::InvalidArgument, "monotonicity scan needs at least 100 grid points");
  if (!(hi > lo)) throw Error(ErrorKind::InvalidArgument, "empty scan interval");
  MonotonicityReport report;
  const double step = (hi - lo) / static_cast<double>(n - 1);
  int direction = 0;
  double prev = f(lo);
  for (std::size_t i = 1; i < n; ++i) {
    const double x = lo + step * static_cast<double>(i);
    const double cur = f(x);
    const double inc = cur - prev;
    const int s = inc > 0 ? 1 : (inc < 0 ? -1 : 0);
    if (s != 0) {
      if (direction == 0) {
        direction = s;
      } else if (s != direction) {
        report.monotone = false;
        report.violation = lo + step * static_cast<double>(i - 1);
        return report;
      }
    }
    prev = cur;
  }
  return report;
}

// ---------------------------------------------------------------- inversion

namespace {

bool damped_newton(const SmoothedThresholdMap& sm, const Vector& w, Vector& z, const SmoothInverseOptions& opt) {
  const double target = opt.tolerance * (1.0 + w.norm());
  int stalls = 0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Vector r = sm.evaluate(z) - w;
    const double rn = r.norm();
    if (rn <= target) return true;
    const Vector step = sm.jacobian(z).partialPivLu().solve(r);
    double t = 1.0;
    Vector next = z - step;
    while ((sm.evaluate(next) - w).norm() >= rn && t > 0x1.0p-30) {
      t *= 0.5;
      next = z - t * step;
    }
    if (t <= 0x1.0p-30) {
      if (++stalls >= opt.max_stalls) return false;
    }
    z = next;
  }
  return (sm.evaluate(z) - w).norm() <= target;
}

// The equation reduces to a monotone scalar root in s = a'z:
//   z(s) = Phi(1)^{-1} (w - phibar(1) - sum_j m_j G_j(s)),  a'z(s) = s.
bool bracket_solve(const SmoothedThresholdMap& sm, const Vector& w, Vector& z) {
  const auto& base = sm.base();
  const auto& t = base.partition().threshold_data();
  const auto& lu = base.lu(0);
  const Vector a = t.direction;
  const Vector rhs0 = lu.solve(w - base.regime(0).intercept);
  std::vector<double> coef;
  for (const auto& m : sm.kinks()) coef.push_back(a.dot(lu.solve(m)));
  const double sigma = sm.sigma();
  auto hinge = [&](double d) { return d * normal_cdf(d / sigma) + sigma * normal_pdf(d / sigma); };
  auto g = [&](double s) {
    double v = s - a.dot(rhs0);
    for (std::size_t j = 0; j < coef.size(); ++j) v += coef[j] * hinge(s - t.thresholds[j]);
    return v;
  };
  // g is strictly monotone with the sign of det Phi(l) / det Phi(1) > 0: increasing.
  double lo = a.dot(rhs0) - 1.0, hi = a.dot(rhs0) + 1.0;
  for (int k = 0; k < 200 && g(lo) > 0; ++k) lo -= (hi - lo);
  for (int k = 0; k < 200 && g(hi) < 0; ++k) hi += (hi - lo);
  if (g(lo) > 0 || g(hi) < 0) return false;
  for (int k = 0; k < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++k) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0 ? lo : hi) = mid;
  }
  const double s = 0.5 * (lo + hi);
  Vector shift = Vector::Zero(w.size());
  for (std::size_t j = 0; j < sm.kinks().size(); ++j) shift += hinge(s - t.thresholds[j]) * sm.kinks()[j];
  z = lu.solve(w - base.regime(0).intercept - shift);
  return true;
}

}  // namespace

Vector invert_smooth(const SmoothedThresholdMap& sm, const Vector& w, const SmoothInverseOptions& options) {
  Vector z = invert(sm.base(), w);
  if (damped_newton(sm, w, z, options)) return z;

  // Continuation: start from a wide bandwidth and track the root down.
  Vector path = invert(sm.base(), w);
  bool tracked = true;
  for (int k = 10; k >= 0 && tracked; --k) {
    const SmoothedThresholdMap wide(sm.base(), GaussianKernel(sm.bandwidth() * std::ldexp(1.0, k)));
    tracked = damped_newton(wide, w, path, options);
  }
  if (tracked) return path;

  Vector bracketed;
  if (bracket_solve(sm, w, bracketed)) {
    Vector polished = bracketed;
    if (damped_newton(sm, w, polished, options)) return polished;
    if ((sm.evaluate(bracketed) - w).norm() <= 1e-9 * (1.0 + w.norm())) return bracketed;
  }
  throw Error(ErrorKind::NoConvergence, "smoothed inverse did not converge");
}

}  // namespace pwasvar
