#include "pwasvar/estimation.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <numbers>

#include "pwasvar/error.hpp"
#include "pwasvar/rng.hpp"

namespace pwasvar {

namespace {

constexpr double kInfeasible = 1e10;

// Hinge regressor for boundary b (1-based): zero on the anchor side of the threshold.
double hinge(std::size_t b, std::size_t anchor, double tau, double x) {
  return b <= anchor ? std::max(tau - x, 0.0) : std::max(x - tau, 0.0);
}

// Regime matrices and intercepts of a continuous map given its anchor matrix and the
// column increments m_b across each boundary b = 1..L-1.
PwaMap build_map(const RegimePartition& partition, std::size_t j, std::size_t anchor, const Matrix& a,
                 const std::vector<Vector>& increments) {
  const auto& taus = partition.threshold_data().thresholds;
  const std::size_t regimes = taus.size() + 1;
  const auto p = a.rows();
  std::vector<AffinePiece> pieces(regimes, {Vector::Zero(p), a});
  for (std::size_t l = anchor + 1; l < regimes; ++l) {
    pieces[l].matrix = pieces[l - 1].matrix;
    pieces[l].matrix.col(static_cast<Eigen::Index>(j)) += increments[l - 1];
    pieces[l].intercept = pieces[l - 1].intercept - taus[l - 1] * increments[l - 1];
  }
  for (std::size_t l = anchor; l-- > 0;) {
    pieces[l].matrix = pieces[l + 1].matrix;
    pieces[l].matrix.col(static_cast<Eigen::Index>(j)) -= increments[l];
    pieces[l].intercept = pieces[l + 1].intercept + taus[l] * increments[l];
  }
  return PwaMap::on_partition(partition, std::move(pieces));
}

RegimePartition partition_with(const ModelSpec& spec, const std::vector<double>& taus) {
  return RegimePartition::threshold(Vector::Unit(static_cast<Eigen::Index>(spec.p),
                                                 static_cast<Eigen::Index>(spec.threshold_variable)),
                                    taus);
}

std::vector<double> thresholds_of(const ModelSpec& spec, const Vector& params, const ParamLayout& layout) {
  if (layout.threshold == ParamLayout::npos) return spec.thresholds;
  return {params[static_cast<Eigen::Index>(layout.threshold)]};
}

void check_data(const ModelSpec& spec, const Matrix& data, std::span<const std::size_t> exogenous) {
  if (static_cast<std::size_t>(data.cols()) != spec.p)
    throw Error(ErrorKind::InvalidArgument, "data has " + std::to_string(data.cols()) + " columns, spec has p = " +
                                                std::to_string(spec.p));
  if (static_cast<std::size_t>(data.rows()) <= spec.k)
    throw Error(ErrorKind::InvalidArgument, "data must have more rows than lags");
  if (spec.skedastic == SkedasticSpec::Kind::ExogenousDummy) {
    if (exogenous.size() != static_cast<std::size_t>(data.rows()))
      throw Error(ErrorKind::InvalidArgument, "exogenous series must have one level per data row");
    for (auto v : exogenous)
      if (v >= spec.exogenous_levels) throw Error(ErrorKind::InvalidArgument, "exogenous level out of range");
  }
}

// Lags of row t, most recent first.
std::vector<Vector> history_at(const Matrix& data, Eigen::Index t, std::size_t k) {
  std::vector<Vector> h(k);
  for (std::size_t i = 0; i < k; ++i) h[i] = data.row(t - static_cast<Eigen::Index>(i) - 1).transpose();
  return h;
}

// Likelihood concentrated over c and the lag maps for fixed thresholds.
//
// With f_0 and the skedastic scales fixed, y_t = f_0(z_t) is a linear regression on
// X_t = [1, z_{t-i}, hinge terms], so the lag coefficients have a closed-form
// (weighted) least-squares optimum. Row r of f_0 is linear in its parameters
// theta_r through G_t = [z_t, hinge terms], hence the concentrated sum of squares
// of equation r is theta_r' S_r theta_r with S_r = G'W M_X G.
class Profile {
 public:
  Profile(const ModelSpec& spec, const std::vector<double>& taus, const Matrix& data,
          std::span<const std::size_t> exogenous)
      : spec_(spec), taus_(taus), partition_(partition_with(spec, taus)) {
    const std::size_t p = spec.p, k = spec.k, nb = taus.size();
    const std::size_t j = spec.threshold_variable;
    const auto T = data.rows();
    n_ = static_cast<std::size_t>(T) - k;
    f0_hinges_ = spec.varying(0) ? nb : 0;
    std::size_t qx = 1;
    for (std::size_t i = 1; i <= k; ++i) qx += p + (spec.varying(i) ? nb : 0);
    const std::size_t qg = p + f0_hinges_;
    const std::size_t groups = spec.skedastic_groups();
    regime_counts_.assign(nb + 1, 0);
    group_counts_.assign(groups, 0);
    gg_.assign(groups, Matrix::Zero(qg, qg));
    gx_.assign(groups, Matrix::Zero(qg, qx));
    xx_.assign(groups, Matrix::Zero(qx, qx));
    Vector g(qg), x(qx);
    for (Eigen::Index t = static_cast<Eigen::Index>(k); t < T; ++t) {
      const Vector z = data.row(t).transpose();
      g.head(p) = z;
      for (std::size_t b = 0; b < f0_hinges_; ++b)
        g[p + b] = hinge(b + 1, spec.anchor_regime, taus[b], z[j]);
      x[0] = 1.0;
      std::size_t col = 1;
      for (std::size_t i = 1; i <= k; ++i) {
        const Vector lag = data.row(t - static_cast<Eigen::Index>(i)).transpose();
        x.segment(col, p) = lag;
        col += p;
        if (spec.varying(i))
          for (std::size_t b = 0; b < nb; ++b) x[col++] = hinge(b + 1, spec.anchor_regime, taus[b], lag[j]);
      }
      std::size_t group = 0;
      if (spec.skedastic == SkedasticSpec::Kind::DiagonalRegime)
        group = partition_.regime_of(data.row(t - static_cast<Eigen::Index>(spec.skedastic_lag)).transpose());
      else if (spec.skedastic == SkedasticSpec::Kind::ExogenousDummy)
        group = exogenous[static_cast<std::size_t>(t)];
      ++regime_counts_[partition_.regime_of(z)];
      ++group_counts_[group];
      gg_[group].noalias() += g * g.transpose();
      gx_[group].noalias() += g * x.transpose();
      xx_[group].noalias() += x * x.transpose();
    }
    rows_.resize(p);
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t c = 0; c <= r; ++c) rows_[r].push_back(c);
      for (std::size_t b = 0; b < f0_hinges_; ++b) rows_[r].push_back(p + b);
      theta_size_ += rows_[r].size();
    }
    if (groups == 1) homo_ = concentrate(Vector::Ones(static_cast<Eigen::Index>(groups)));
  }

  std::size_t theta_size() const { return theta_size_; }
  std::size_t scale_size() const { return spec_.skedastic_groups() > 1 ? (spec_.skedastic_groups() - 1) * spec_.p : 0; }
  std::size_t size() const { return theta_size_ + scale_size(); }
  std::size_t observations() const { return n_; }

  // Full-length coefficient vector of row r of f_0 in the G basis.
  Vector row_theta(const Vector& x, std::size_t r) const {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(spec_.p + f0_hinges_));
    std::size_t offset = 0;
    for (std::size_t q = 0; q < r; ++q) offset += rows_[q].size();
    for (std::size_t i = 0; i < rows_[r].size(); ++i)
      out[static_cast<Eigen::Index>(rows_[r][i])] = x[static_cast<Eigen::Index>(offset + i)];
    return out;
  }

  Matrix anchor_matrix(const Vector& x) const {
    const auto p = static_cast<Eigen::Index>(spec_.p);
    Matrix a(p, p);
    for (Eigen::Index r = 0; r < p; ++r) a.row(r) = row_theta(x, static_cast<std::size_t>(r)).head(p).transpose();
    return a;
  }

  std::vector<Vector> increments(const Vector& x) const {
    const auto p = static_cast<Eigen::Index>(spec_.p);
    std::vector<Vector> m(taus_.size(), Vector::Zero(p));
    for (std::size_t b = 0; b < f0_hinges_; ++b)
      for (Eigen::Index r = 0; r < p; ++r)
        m[b][r] = row_theta(x, static_cast<std::size_t>(r))[p + static_cast<Eigen::Index>(b)];
    return m;
  }

  // log sd of group g, equation r.
  double log_sd(const Vector& x, std::size_t g, std::size_t r) const {
    if (scale_size() == 0 || g == spec_.skedastic_reference) return 0.0;
    const std::size_t slot = g < spec_.skedastic_reference ? g : g - 1;
    return x[static_cast<Eigen::Index>(theta_size_ + slot * spec_.p + r)];
  }

  double value(const Vector& x) const {
    const std::size_t p = spec_.p;
    const PwaMap f0 = build_map(partition_, spec_.threshold_variable, spec_.anchor_regime, anchor_matrix(x),
                                increments(x));
    double logdet = 0.0;
    int sign = 0;
    for (std::size_t l = 0; l < f0.num_regimes(); ++l) {
      const double det = f0.lu(l).determinant();
      const int s = det > 0 ? 1 : (det < 0 ? -1 : 0);
      if (s == 0 || (sign != 0 && s != sign)) return -std::numeric_limits<double>::infinity();
      sign = s;
      if (regime_counts_[l] > 0) logdet += static_cast<double>(regime_counts_[l]) * std::log(std::abs(det));
    }
    double quad = 0.0, logsd = 0.0;
    for (std::size_t r = 0; r < p; ++r) {
      const Vector th = row_theta(x, r);
      if (scale_size() == 0) {
        quad += th.dot(homo_.s * th);
      } else {
        const Concentrated c = concentrate(weights(x, r));
        quad += th.dot(c.s * th);
        for (std::size_t g = 0; g < group_counts_.size(); ++g)
          logsd += static_cast<double>(group_counts_[g]) * log_sd(x, g, r);
      }
    }
    return -0.5 * static_cast<double>(n_ * p) * std::log(2.0 * std::numbers::pi) - 0.5 * quad + logdet - logsd;
  }

  // Least-squares lag coefficients: row r is [c_r, lag blocks].
  Matrix lag_coefficients(const Vector& x) const {
    const std::size_t p = spec_.p;
    Matrix b(static_cast<Eigen::Index>(p), xx_[0].cols());
    for (std::size_t r = 0; r < p; ++r) {
      const Concentrated c = scale_size() == 0 ? homo_ : concentrate(weights(x, r));
      b.row(static_cast<Eigen::Index>(r)) = (c.coef * row_theta(x, r)).transpose();
    }
    return b;
  }

  const RegimePartition& partition() const { return partition_; }
  const std::vector<double>& taus() const { return taus_; }

 private:
  struct Concentrated {
    Matrix s;     // G'W M_X G
    Matrix coef;  // (X'WX)^+ X'WG
  };

  Vector weights(const Vector& x, std::size_t r) const {
    Vector w(static_cast<Eigen::Index>(group_counts_.size()));
    for (std::size_t g = 0; g < group_counts_.size(); ++g)
      w[static_cast<Eigen::Index>(g)] = std::exp(-2.0 * log_sd(x, g, r));
    return w;
  }

  Concentrated concentrate(const Vector& w) const {
    Matrix gg = Matrix::Zero(gg_[0].rows(), gg_[0].cols());
    Matrix gx = Matrix::Zero(gx_[0].rows(), gx_[0].cols());
    Matrix xx = Matrix::Zero(xx_[0].rows(), xx_[0].cols());
    for (std::size_t g = 0; g < gg_.size(); ++g) {
      gg += w[static_cast<Eigen::Index>(g)] * gg_[g];
      gx += w[static_cast<Eigen::Index>(g)] * gx_[g];
      xx += w[static_cast<Eigen::Index>(g)] * xx_[g];
    }
    Concentrated c;
    c.coef = xx.completeOrthogonalDecomposition().solve(Matrix(gx.transpose()));
    c.s = gg - gx * c.coef;
    c.s = 0.5 * (c.s + c.s.transpose()).eval();
    return c;
  }

  ModelSpec spec_;
  std::vector<double> taus_;
  RegimePartition partition_;
  std::size_t n_ = 0;
  std::size_t f0_hinges_ = 0;
  std::size_t theta_size_ = 0;
  std::vector<std::vector<std::size_t>> rows_;
  std::vector<std::size_t> regime_counts_;
  std::vector<std::size_t> group_counts_;
  std::vector<Matrix> gg_, gx_, xx_;
  Concentrated homo_;
};

// Profile point -> full parameter vector (sign-normalized so diag(Phi_0 at anchor) > 0).
Vector expand(const ModelSpec& spec, const ParamLayout& layout, const Profile& profile, Vector x) {
  const std::size_t p = spec.p;
  {
    const Matrix a = profile.anchor_matrix(x);
    std::size_t offset = 0;
    for (std::size_t r = 0; r < p; ++r) {
      const std::size_t len = r + 1 + (spec.varying(0) ? spec.thresholds.size() : 0);
      if (a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) < 0.0)
        x.segment(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(len)) *= -1.0;
      offset += len;
    }
  }
  Vector params = Vector::Zero(static_cast<Eigen::Index>(layout.size()));
  // f_0 block: lower-triangular anchor entries row major, then increments b-major.
  const Matrix a = profile.anchor_matrix(x);
  const std::vector<Vector> m0 = profile.increments(x);
  std::size_t pos = layout.map_offset[0];
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c <= r; ++c)
      params[static_cast<Eigen::Index>(pos++)] = a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  if (spec.varying(0))
    for (const auto& m : m0)
      for (std::size_t r = 0; r < p; ++r) params[static_cast<Eigen::Index>(pos++)] = m[static_cast<Eigen::Index>(r)];
  // Lag blocks straight from the regression coefficients.
  const Matrix b = profile.lag_coefficients(x);
  const std::size_t nb = spec.thresholds.size();
  Eigen::Index col = 1;
  for (std::size_t i = 1; i <= spec.k; ++i) {
    pos = layout.map_offset[i];
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < p; ++c)
        params[static_cast<Eigen::Index>(pos++)] = b(static_cast<Eigen::Index>(r), col + static_cast<Eigen::Index>(c));
    col += static_cast<Eigen::Index>(p);
    if (spec.varying(i)) {
      for (std::size_t h = 0; h < nb; ++h)
        for (std::size_t r = 0; r < p; ++r)
          params[static_cast<Eigen::Index>(pos++)] = b(static_cast<Eigen::Index>(r), col + static_cast<Eigen::Index>(h));
      col += static_cast<Eigen::Index>(nb);
    }
  }
  params.segment(static_cast<Eigen::Index>(layout.intercept), static_cast<Eigen::Index>(p)) = b.col(0);
  if (layout.threshold != ParamLayout::npos) params[static_cast<Eigen::Index>(layout.threshold)] = profile.taus()[0];
  if (layout.skedastic != ParamLayout::npos)
    params.segment(static_cast<Eigen::Index>(layout.skedastic), static_cast<Eigen::Index>(profile.scale_size())) =
        x.tail(static_cast<Eigen::Index>(profile.scale_size()));
  return params;
}

// Reduced-form OLS start: Phi_0 = chol(Sigma)^{-1}, no switching, unit scales.
Vector linear_start(const ModelSpec& spec, const Profile& profile, const Matrix& data) {
  const std::size_t p = spec.p, k = spec.k;
  const auto T = data.rows();
  const auto n = T - static_cast<Eigen::Index>(k);
  Matrix x(n, static_cast<Eigen::Index>(1 + k * p));
  x.col(0).setOnes();
  for (std::size_t i = 1; i <= k; ++i)
    x.middleCols(static_cast<Eigen::Index>(1 + (i - 1) * p), static_cast<Eigen::Index>(p)) =
        data.middleRows(static_cast<Eigen::Index>(k - i), n);
  const Matrix y = data.bottomRows(n);
  const Matrix coef = x.colPivHouseholderQr().solve(y);
  const Matrix u = y - x * coef;
  const Matrix sigma = u.transpose() * u / static_cast<double>(n);
  const Matrix l = sigma.llt().matrixL();
  const Matrix a = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(static_cast<Eigen::Index>(p),
                                                                            static_cast<Eigen::Index>(p)));
  Vector start = Vector::Zero(static_cast<Eigen::Index>(profile.size()));
  std::size_t pos = 0;
  const std::size_t hinges = spec.varying(0) ? spec.thresholds.size() : 0;
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t c = 0; c <= r; ++c)
      start[static_cast<Eigen::Index>(pos++)] = a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    pos += hinges;
  }
  return start;
}

struct Objective {
  std::function<double(const Vector&)> f;
};

double gsl_f(const gsl_vector* v, void* params) {
  const auto* obj = static_cast<const Objective*>(params);
  const Eigen::Map<const Vector> x(v->data, static_cast<Eigen::Index>(v->size));
  const double value = obj->f(Vector(x));
  return std::isfinite(value) ? value : kInfeasible;
}

void numeric_gradient(const Objective& obj, const Vector& x, Vector& grad) {
  grad.resize(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    grad[i] = (obj.f(xp) - obj.f(xm)) / (2.0 * h);
  }
}

void gsl_df(const gsl_vector* v, void* params, gsl_vector* g) {
  const auto* obj = static_cast<const Objective*>(params);
  const Eigen::Map<const Vector> x(v->data, static_cast<Eigen::Index>(v->size));
  Vector grad;
  numeric_gradient(*obj, Vector(x), grad);
  for (Eigen::Index i = 0; i < grad.size(); ++i)
    gsl_vector_set(g, static_cast<std::size_t>(i), std::isfinite(grad[i]) ? grad[i] : 0.0);
}

void gsl_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* g) {
  *f = gsl_f(v, params);
  gsl_df(v, params, g);
}

struct LocalOptimum {
  Vector x;
  double value = std::numeric_limits<double>::infinity();
  bool converged = false;
};

using VectorPtr = std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)>;

VectorPtr to_gsl(const Vector& x) {
  VectorPtr v(gsl_vector_alloc(static_cast<std::size_t>(x.size())), &gsl_vector_free);
  for (Eigen::Index i = 0; i < x.size(); ++i) gsl_vector_set(v.get(), static_cast<std::size_t>(i), x[i]);
  return v;
}

Vector from_gsl(const gsl_vector* v) {
  return Eigen::Map<const Vector>(v->data, static_cast<Eigen::Index>(v->size));
}

// Nelder-Mead to a small simplex, then BFGS with central-difference gradients; the
// BFGS point is kept only if it improves.
LocalOptimum minimize(const Objective& obj, const Vector& start, const EstimationOptions& options) {
  LocalOptimum best;
  if (!std::isfinite(obj.f(start))) return best;
  const auto n = static_cast<std::size_t>(start.size());

  gsl_multimin_function fn{&gsl_f, n, const_cast<Objective*>(&obj)};
  std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> nm(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n), &gsl_multimin_fminimizer_free);
  VectorPtr x0 = to_gsl(start);
  Vector steps(start.size());
  for (Eigen::Index i = 0; i < start.size(); ++i) steps[i] = 0.05 + 0.1 * std::abs(start[i]);
  VectorPtr step = to_gsl(steps);
  gsl_multimin_fminimizer_set(nm.get(), &fn, x0.get(), step.get());
  bool nm_done = false;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    if (gsl_multimin_fminimizer_iterate(nm.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(nm.get()), 1e-3 * std::sqrt(options.tolerance)) ==
        GSL_SUCCESS) {
      nm_done = true;
      break;
    }
  }
  best.x = from_gsl(gsl_multimin_fminimizer_x(nm.get()));
  best.value = obj.f(best.x);

  gsl_multimin_function_fdf fdf{&gsl_f, &gsl_df, &gsl_fdf, n, const_cast<Objective*>(&obj)};
  std::unique_ptr<gsl_multimin_fdfminimizer, decltype(&gsl_multimin_fdfminimizer_free)> qn(
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n), &gsl_multimin_fdfminimizer_free);
  VectorPtr x1 = to_gsl(best.x);
  gsl_multimin_fdfminimizer_set(qn.get(), &fdf, x1.get(), 0.01, 0.1);
  bool qn_done = false;
  for (std::size_t it = 0; it < 500; ++it) {
    if (gsl_multimin_fdfminimizer_iterate(qn.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_gradient(gsl_multimin_fdfminimizer_gradient(qn.get()), options.tolerance) == GSL_SUCCESS) {
      qn_done = true;
      break;
    }
  }
  const Vector polished = from_gsl(gsl_multimin_fdfminimizer_x(qn.get()));
  const double value = obj.f(polished);
  if (std::isfinite(value) && value <= best.value) {
    best.x = polished;
    best.value = value;
  }
  Vector grad;
  numeric_gradient(obj, best.x, grad);
  best.converged = std::isfinite(best.value) && (qn_done || nm_done || grad.norm() < 1e-6);
  return best;
}

struct ProfileOptimum {
  LocalOptimum local;
  std::size_t successes = 0;
};

ProfileOptimum optimize_profile(const ModelSpec& spec, const Profile& profile, const Matrix& data,
                                const EstimationOptions& options) {
  const double scale = static_cast<double>(profile.observations());
  const Objective obj{[&profile, scale](const Vector& x) { return -profile.value(x) / scale; }};
  const Vector base = linear_start(spec, profile, data);
  ProfileOptimum out;
  const std::size_t starts = std::max<std::size_t>(options.restarts, 1);
  for (std::size_t s = 0; s < starts; ++s) {
    Vector start = base;
    if (s > 0) {
      CounterRng rng(options.seed, s);
      for (Eigen::Index i = 0; i < start.size(); ++i)
        start[i] += options.perturbation * (0.5 + std::abs(base[i])) * rng.normal();
    }
    const LocalOptimum local = minimize(obj, start, options);
    if (!std::isfinite(local.value) || local.value >= kInfeasible) continue;
    ++out.successes;
    if (local.value < out.local.value) out.local = local;
  }
  return out;
}

std::vector<double> threshold_grid(const ModelSpec& spec, const Matrix& data, const EstimationOptions& options) {
  std::vector<double> values;
  for (Eigen::Index t = static_cast<Eigen::Index>(spec.k); t < data.rows(); ++t)
    values.push_back(data(t, static_cast<Eigen::Index>(spec.threshold_variable)));
  std::sort(values.begin(), values.end());
  const std::size_t points = std::max<std::size_t>(options.threshold_grid, 3);
  std::vector<double> grid;
  for (std::size_t g = 0; g < points; ++g) {
    const double q = options.threshold_trim + (1.0 - 2.0 * options.threshold_trim) * static_cast<double>(g) /
                                                  static_cast<double>(points - 1);
    grid.push_back(values[static_cast<std::size_t>(q * static_cast<double>(values.size() - 1))]);
  }
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

Matrix numeric_hessian(const std::function<double(const Vector&)>& f, const Vector& x,
                       const std::vector<Eigen::Index>& active, Vector& gradient) {
  const auto m = static_cast<Eigen::Index>(active.size());
  Matrix h = Matrix::Zero(m, m);
  gradient = Vector::Zero(m);
  std::vector<double> step(active.size());
  for (Eigen::Index a = 0; a < m; ++a) step[a] = 1e-4 * std::max(1.0, std::abs(x[active[a]]));
  const double f0 = f(x);
  auto shifted = [&](Eigen::Index a, double sa, Eigen::Index b, double sb) {
    Vector y = x;
    y[active[a]] += sa * step[a];
    if (b >= 0) y[active[b]] += sb * step[b];
    return f(y);
  };
  for (Eigen::Index a = 0; a < m; ++a) {
    const double fp = shifted(a, 1, -1, 0), fm = shifted(a, -1, -1, 0);
    gradient[a] = (fp - fm) / (2.0 * step[a]);
    h(a, a) = (fp - 2.0 * f0 + fm) / (step[a] * step[a]);
    for (Eigen::Index b = 0; b < a; ++b) {
      const double v = (shifted(a, 1, b, 1) - shifted(a, 1, b, -1) - shifted(a, -1, b, 1) + shifted(a, -1, b, -1)) /
                       (4.0 * step[a] * step[b]);
      h(a, b) = h(b, a) = v;
    }
  }
  return h;
}

}  // namespace

std::size_t ModelSpec::skedastic_groups() const {
  switch (skedastic) {
    case SkedasticSpec::Kind::Homoskedastic:
      return 1;
    case SkedasticSpec::Kind::DiagonalRegime:
      return num_regimes();
    case SkedasticSpec::Kind::ExogenousDummy:
      return exogenous_levels;
  }
  return 1;
}

void ModelSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); };
  if (p < 1) fail("p must be at least 1");
  if (threshold_variable >= p) fail("threshold variable index out of range");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()) ||
      std::adjacent_find(thresholds.begin(), thresholds.end()) != thresholds.end())
    fail("thresholds must be strictly increasing");
  if (free_threshold && thresholds.size() != 1) fail("a free threshold requires exactly two regimes");
  if (regime_varying.size() > k + 1) fail("regime_varying has more entries than maps");
  if (anchor_regime >= num_regimes()) fail("anchor regime out of range");
  if (normalization == Normalization::FixedQ) {
    if (fixed_q.rows() != static_cast<Eigen::Index>(p) || fixed_q.cols() != static_cast<Eigen::Index>(p))
      fail("fixed Q has the wrong size");
    if (!is_orthogonal(fixed_q, 1e-8)) throw Error(ErrorKind::NotOrthogonal, "fixed Q is not orthogonal");
    if (skedastic != SkedasticSpec::Kind::Homoskedastic)
      fail("a fixed rotation is only supported with homoskedastic shocks");
  }
  if (skedastic == SkedasticSpec::Kind::DiagonalRegime && (skedastic_lag < 1 || skedastic_lag > k))
    fail("skedastic lag out of range");
  if (skedastic == SkedasticSpec::Kind::ExogenousDummy && exogenous_levels < 2)
    fail("exogenous dummy needs at least two levels");
  if (skedastic_reference >= skedastic_groups()) fail("skedastic reference out of range");
}

RegimePartition ModelSpec::partition() const { return partition_with(*this, thresholds); }

ParamLayout::ParamLayout(const ModelSpec& spec) : spec_(spec) {
  spec.validate();
  const std::size_t p = spec.p, nb = spec.thresholds.size();
  std::size_t pos = 0;
  map_offset.push_back(pos);
  pos += p * (p + 1) / 2 + (spec.varying(0) ? nb * p : 0);
  for (std::size_t i = 1; i <= spec.k; ++i) {
    map_offset.push_back(pos);
    pos += p * p + (spec.varying(i) ? nb * p : 0);
  }
  intercept = pos;
  pos += p;
  if (spec.free_threshold) threshold = pos++;
  if (spec.skedastic_groups() > 1) {
    skedastic = pos;
    pos += (spec.skedastic_groups() - 1) * p;
  }
  total = pos;
}

std::vector<std::string> ParamLayout::names() const {
  const std::size_t p = spec_.p, nb = spec_.thresholds.size();
  std::vector<std::string> out;
  auto idx = [](std::size_t v) { return std::to_string(v + 1); };
  for (std::size_t i = 0; i <= spec_.k; ++i) {
    const std::string map = "Phi" + std::to_string(i);
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < (i == 0 ? r + 1 : p); ++c) out.push_back(map + "[" + idx(r) + "," + idx(c) + "]");
    if (spec_.varying(i))
      for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t r = 0; r < p; ++r) out.push_back(map + ".m" + idx(b) + "[" + idx(r) + "]");
  }
  for (std::size_t r = 0; r < p; ++r) out.push_back("c[" + idx(r) + "]");
  if (threshold != npos) out.push_back("tau");
  for (std::size_t g = 0; g < spec_.skedastic_groups(); ++g) {
    if (g == spec_.skedastic_reference || spec_.skedastic_groups() == 1) continue;
    for (std::size_t r = 0; r < p; ++r) out.push_back("log_sd" + idx(g) + "[" + idx(r) + "]");
  }
  return out;
}

std::size_t parameter_count(const ModelSpec& spec) { return ParamLayout(spec).size(); }

PwaSvarModel unpack(const ModelSpec& spec, const Vector& params) {
  const ParamLayout layout(spec);
  if (static_cast<std::size_t>(params.size()) != layout.size())
    throw Error(ErrorKind::InvalidArgument, "parameter vector has length " + std::to_string(params.size()) +
                                                ", expected " + std::to_string(layout.size()));
  const auto p = static_cast<Eigen::Index>(spec.p);
  const std::vector<double> taus = thresholds_of(spec, params, layout);
  const RegimePartition part = partition_with(spec, taus);
  const std::size_t nb = taus.size();

  auto read_map = [&](std::size_t i) {
    std::size_t pos = layout.map_offset[i];
    Matrix a = Matrix::Zero(p, p);
    for (Eigen::Index r = 0; r < p; ++r)
      for (Eigen::Index c = 0; c < (i == 0 ? r + 1 : p); ++c) a(r, c) = params[static_cast<Eigen::Index>(pos++)];
    std::vector<Vector> m(nb, Vector::Zero(p));
    if (spec.varying(i))
      for (std::size_t b = 0; b < nb; ++b) m[b] = params.segment(static_cast<Eigen::Index>(pos + b * spec.p), p);
    return build_map(part, spec.threshold_variable, spec.anchor_regime, a, m);
  };

  PwaMap f0 = read_map(0);
  std::vector<PwaMap> lags;
  for (std::size_t i = 1; i <= spec.k; ++i) lags.push_back(read_map(i));
  Vector c = params.segment(static_cast<Eigen::Index>(layout.intercept), p);

  SkedasticSpec shocks;
  if (layout.skedastic != ParamLayout::npos) {
    std::vector<Vector> sd;
    std::size_t slot = 0;
    for (std::size_t g = 0; g < spec.skedastic_groups(); ++g) {
      if (g == spec.skedastic_reference) {
        sd.push_back(Vector::Ones(p));
      } else {
        sd.push_back(params.segment(static_cast<Eigen::Index>(layout.skedastic + slot * spec.p), p).array().exp());
        ++slot;
      }
    }
    shocks = spec.skedastic == SkedasticSpec::Kind::DiagonalRegime
                 ? SkedasticSpec::diagonal_regime(spec.skedastic_lag, std::move(sd), spec.skedastic_reference)
                 : SkedasticSpec::exogenous_dummy(std::move(sd), spec.skedastic_reference);
  }
  if (spec.normalization == ModelSpec::Normalization::FixedQ) {
    const Matrix qt = spec.fixed_q.transpose();
    f0 = f0.premultiplied(qt);
    for (auto& f : lags) f = f.premultiplied(qt);
    c = qt * c;
  }
  return PwaSvarModel(std::move(c), std::move(f0), std::move(lags), std::move(shocks));
}

Vector pack(const ModelSpec& spec, const PwaSvarModel& model) {
  const ParamLayout layout(spec);
  const auto p = static_cast<Eigen::Index>(spec.p);
  if (model.dim() != spec.p || model.lags_count() != spec.k)
    throw Error(ErrorKind::InvalidArgument, "model dimensions do not match the spec");
  const RegimePartition& part = model.partition();
  if (!part.is_threshold() || part.num_regimes() != spec.num_regimes() ||
      (part.threshold_data().direction - Vector::Unit(p, static_cast<Eigen::Index>(spec.threshold_variable)))
              .norm() != 0.0)
    throw Error(ErrorKind::InvalidArgument, "model partition does not match the spec");
  if (!spec.free_threshold && part.threshold_data().thresholds != spec.thresholds)
    throw Error(ErrorKind::InvalidArgument, "model thresholds do not match the spec");

  const bool rotate = spec.normalization == ModelSpec::Normalization::FixedQ;
  auto aligned = [&](const PwaMap& f) { return rotate ? f.premultiplied(spec.fixed_q) : f; };
  const auto j = static_cast<Eigen::Index>(spec.threshold_variable);
  const std::size_t anchor = spec.anchor_regime, nb = spec.thresholds.size();

  Vector params = Vector::Zero(static_cast<Eigen::Index>(layout.size()));
  Vector c = rotate ? Vector(spec.fixed_q * model.intercept()) : model.intercept();
  for (std::size_t i = 0; i <= spec.k; ++i) {
    const PwaMap f = aligned(i == 0 ? model.f0() : model.lag(i));
    const Matrix& a = f.regime(anchor).matrix;
    if (i == 0)
      c -= f.regime(anchor).intercept;
    else
      c += f.regime(anchor).intercept;
    std::size_t pos = layout.map_offset[i];
    for (Eigen::Index r = 0; r < p; ++r)
      for (Eigen::Index col = 0; col < (i == 0 ? r + 1 : p); ++col) params[static_cast<Eigen::Index>(pos++)] = a(r, col);
    if (spec.varying(i))
      for (std::size_t b = 0; b < nb; ++b) {
        params.segment(static_cast<Eigen::Index>(pos), p) = f.regime(b + 1).matrix.col(j) - f.regime(b).matrix.col(j);
        pos += spec.p;
      }
  }
  params.segment(static_cast<Eigen::Index>(layout.intercept), p) = c;
  if (layout.threshold != ParamLayout::npos)
    params[static_cast<Eigen::Index>(layout.threshold)] = part.threshold_data().thresholds[0];
  if (layout.skedastic != ParamLayout::npos) {
    std::size_t slot = 0;
    for (std::size_t g = 0; g < spec.skedastic_groups(); ++g) {
      if (g == spec.skedastic_reference) continue;
      params.segment(static_cast<Eigen::Index>(layout.skedastic + slot * spec.p), p) =
          model.shocks().sd.at(g).array().log();
      ++slot;
    }
  }
  return params;
}

double log_likelihood(const ModelSpec& spec, const Vector& params, const Matrix& data,
                      std::span<const std::size_t> exogenous) {
  check_data(spec, data, exogenous);
  std::optional<PwaSvarModel> model;
  try {
    model.emplace(unpack(spec, params));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NotInvertible) return -std::numeric_limits<double>::infinity();
    throw;
  }
  const bool exo = spec.skedastic == SkedasticSpec::Kind::ExogenousDummy;
  double total = 0.0;
  for (Eigen::Index t = static_cast<Eigen::Index>(spec.k); t < data.rows(); ++t) {
    const std::vector<Vector> hist = history_at(data, t, spec.k);
    std::optional<std::size_t> level;
    if (exo) level = exogenous[static_cast<std::size_t>(t)];
    total += conditional_log_density(*model, data.row(t).transpose(), hist, level);
  }
  return total;
}

EstimationResult estimate_ml(const ModelSpec& spec, const Matrix& data, const EstimationOptions& options,
                             std::span<const std::size_t> exogenous) {
  const ParamLayout layout(spec);
  check_data(spec, data, exogenous);
  if (static_cast<std::size_t>(data.rows()) <= spec.k + layout.size())
    throw Error(ErrorKind::InvalidArgument, "sample too short for " + std::to_string(layout.size()) + " parameters");

  auto run = [&](const std::vector<double>& taus) {
    const Profile profile(spec, taus, data, exogenous);
    return std::make_pair(optimize_profile(spec, profile, data, options), taus);
  };

  std::pair<ProfileOptimum, std::vector<double>> best{ProfileOptimum{}, spec.thresholds};
  if (!spec.free_threshold) {
    best = run(spec.thresholds);
  } else {
    const std::vector<double> grid = threshold_grid(spec, data, options);
    std::size_t arg = 0;
    std::vector<double> values(grid.size(), std::numeric_limits<double>::infinity());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      auto trial = run({grid[g]});
      values[g] = trial.first.local.value;
      if (values[g] < best.first.local.value) {
        best = std::move(trial);
        arg = g;
      }
    }
    // Golden-section refinement between the neighbours of the best grid point.
    double lo = grid[arg == 0 ? 0 : arg - 1], hi = grid[std::min(arg + 1, grid.size() - 1)];
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
    auto f1 = run({x1}), f2 = run({x2});
    for (int it = 0; it < 40 && hi - lo > 1e-8 * std::max(1.0, std::abs(hi)); ++it) {
      if (f1.first.local.value < f2.first.local.value) {
        hi = x2;
        x2 = x1;
        f2 = std::move(f1);
        x1 = hi - ratio * (hi - lo);
        f1 = run({x1});
      } else {
        lo = x1;
        x1 = x2;
        f1 = std::move(f2);
        x2 = lo + ratio * (hi - lo);
        f2 = run({x2});
      }
    }
    for (auto* cand : {&f1, &f2})
      if (cand->first.local.value < best.first.local.value) best = std::move(*cand);
  }
  if (best.first.successes == 0 || !std::isfinite(best.first.local.value))
    throw Error(ErrorKind::AllStartsFailed, "every start ended at an infeasible point");

  const Profile profile(spec, best.second, data, exogenous);
  EstimationResult result;
  result.spec = spec;
  result.params = expand(spec, layout, profile, best.first.local.x);
  result.names = layout.names();
  result.model.emplace(unpack(spec, result.params));
  result.log_likelihood = log_likelihood(spec, result.params, data, exogenous);
  result.converged = best.first.local.converged;
  result.restarts = std::max<std::size_t>(options.restarts, 1);
  result.successful_starts = best.first.successes;
  result.certificate = result.model->certificate();
  result.seed = options.seed;

  std::vector<Eigen::Index> active;
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (i != layout.threshold) active.push_back(static_cast<Eigen::Index>(i));
  const auto m = static_cast<Eigen::Index>(layout.size());
  result.covariance = Matrix::Constant(m, m, std::numeric_limits<double>::quiet_NaN());
  result.std_errors = Vector::Constant(m, std::numeric_limits<double>::quiet_NaN());
  if (options.standard_errors) {
    Vector gradient;
    const Matrix h = numeric_hessian([&](const Vector& x) { return log_likelihood(spec, x, data, exogenous); },
                                     result.params, active, gradient);
    result.gradient_norm = gradient.norm();
    const Eigen::LLT<Matrix> llt(-h);
    if (llt.info() == Eigen::Success) {
      const Matrix cov = llt.solve(Matrix::Identity(h.rows(), h.cols()));
      for (std::size_t a = 0; a < active.size(); ++a) {
        for (std::size_t b = 0; b < active.size(); ++b)
          result.covariance(active[a], active[b]) = cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        result.std_errors[active[a]] = std::sqrt(cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)));
      }
    }
  } else {
    Vector grad(static_cast<Eigen::Index>(active.size()));
    for (std::size_t a = 0; a < active.size(); ++a) {
      const double h = 1e-6 * std::max(1.0, std::abs(result.params[active[a]]));
      Vector xp = result.params, xm = result.params;
      xp[active[a]] += h;
      xm[active[a]] -= h;
      grad[static_cast<Eigen::Index>(a)] =
          (log_likelihood(spec, xp, data, exogenous) - log_likelihood(spec, xm, data, exogenous)) / (2.0 * h);
    }
    result.gradient_norm = grad.norm();
  }
  return result;
}

double chi2_sf(double x, double df) {
  if (!(x >= 0.0)) throw Error(ErrorKind::DomainError, "chi-square statistic must be non-negative");
  if (!(df >= 1.0)) throw Error(ErrorKind::DomainError, "chi-square degrees of freedom must be at least 1");
  if (x == 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

LrTest lr_test(const EstimationResult& unrestricted, const EstimationResult& restricted, std::size_t df) {
  const std::size_t nu = ParamLayout(unrestricted.spec).smooth_size();
  const std::size_t nr = ParamLayout(restricted.spec).smooth_size();
  if (nu <= nr || nu - nr != df)
    throw Error(ErrorKind::NotNested, "parameter counts " + std::to_string(nu) + " and " + std::to_string(nr) +
                                          " are inconsistent with df = " + std::to_string(df));
  LrTest out;
  out.df = df;
  out.raw_statistic = 2.0 * (unrestricted.log_likelihood - restricted.log_likelihood);
  out.statistic = out.raw_statistic;
  if (out.statistic < 0.0) {
    if (out.statistic < -1e-6) {
      out.clamped = true;
      std::cerr << "warning: restricted log-likelihood exceeds unrestricted by " << -0.5 * out.raw_statistic
                << "; the unrestricted optimizer did not reach its maximum\n";
    }
    out.statistic = 0.0;
  }
  out.p_value = chi2_sf(out.statistic, static_cast<double>(df));
  return out;
}

std::string format_lr(const LrTest& test) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f [%.2f]", test.statistic, test.p_value);
  return buf;
}

HypothesisReport test_hypotheses(const ModelSpec& spec, const Matrix& data, const EstimationOptions& options,
                                 std::span<const std::size_t> exogenous) {
  if (spec.num_regimes() != 2) throw Error(ErrorKind::InvalidArgument, "hypothesis tests need a two-regime spec");
  if (!spec.varying(0)) throw Error(ErrorKind::InvalidArgument, "the unrestricted spec must let f_0 switch");
  ModelSpec ns = spec;
  ns.regime_varying.resize(spec.k + 1, true);
  ns.regime_varying[0] = false;
  ModelSpec lin = spec;
  lin.regime_varying.assign(spec.k + 1, false);
  lin.free_threshold = false;

  HypothesisReport report{estimate_ml(spec, data, options, exogenous), estimate_ml(ns, data, options, exogenous),
                          EstimationResult{}, {}};
  if (spec.free_threshold)
    lin.thresholds = {report.unrestricted.params[static_cast<Eigen::Index>(ParamLayout(spec).threshold)]};
  report.linear = estimate_ml(lin, data, options, exogenous);
  const std::size_t nu = ParamLayout(spec).smooth_size();
  report.rows.push_back({"no endogenous switching",
                         lr_test(report.unrestricted, report.no_switching, nu - ParamLayout(ns).smooth_size())});
  report.rows.push_back(
      {"linearity", lr_test(report.unrestricted, report.linear, nu - ParamLayout(lin).smooth_size())});
  return report;
}

}  // namespace pwasvar
