// Command-line front end: validate, simulate, estimate, test, irf, identify, smooth-demo.
//
// Exit codes: 0 success, 1 validation or parse error, 2 I/O error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pwasvar/error.hpp"
#include "pwasvar/estimation.hpp"
#include "pwasvar/identification.hpp"
#include "pwasvar/io.hpp"
#include "pwasvar/irf.hpp"
#include "pwasvar/model.hpp"
#include "pwasvar/smoothing.hpp"

namespace fs = std::filesystem;
using namespace pwasvar;

namespace {

struct Options {
  std::string model, data, out, rows, spec;
  std::optional<std::uint64_t> seed;
  std::size_t restarts = 8;
  std::size_t horizon = 20;
  std::size_t draws = 1000;
  std::size_t periods = 200;
  std::size_t shock = 1;
  double size = 1.0;
  bool zero_future = false;
  std::string history, at;
  std::string anchor, compare, variances, instrument;
  std::size_t angles = 3600;
  double a1 = 10.0, a2 = 0.1, scale = 1.0, bandwidth = 1.0, lo = -10.0, hi = 10.0;
  std::size_t points = 81;
};

std::uint64_t seed_of(const Options& o) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("PWASVAR_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::InvalidArgument, std::string("PWASVAR_SEED is not an unsigned integer: ") + env);
  }
  return 0;
}

fs::path out_file(const Options& o, const std::string& name) {
  if (o.out.empty()) throw Error(ErrorKind::InvalidArgument, "--out is required");
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + o.out + ": " + ec.message());
  return fs::path(o.out) / name;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, what + ": '" + item + "' is not a number");
    }
  }
  return out;
}

Vector to_vector(const std::vector<double>& xs) { return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size())); }

/// "x1,y1;x2,y2" with the most recent value first.
std::vector<Vector> parse_history(const std::string& s, std::size_t p) {
  std::vector<Vector> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    Vector v = to_vector(parse_list(item, "--history"));
    if (static_cast<std::size_t>(v.size()) != p)
      throw Error(ErrorKind::InvalidArgument, "--history entries need " + std::to_string(p) + " values");
    out.push_back(v);
  }
  return out;
}

std::pair<std::string, std::string> row_range(const std::string& rows) {
  const auto colon = rows.find(':');
  if (colon == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--rows expects FIRST:LAST");
  return {rows.substr(0, colon), rows.substr(colon + 1)};
}

struct LoadedData {
  DataTable table;
  std::vector<std::size_t> exogenous;
};

LoadedData load_data(const Options& o, const std::optional<DataConfig>& cfg) {
  if (o.data.empty()) throw Error(ErrorKind::InvalidArgument, "--data is required");
  std::vector<ColumnSpec> cols = cfg ? cfg->columns : std::vector<ColumnSpec>{};
  const bool exo = cfg && !cfg->exogenous.empty();
  if (exo && !cols.empty()) cols.push_back({cfg->exogenous, Transform::Identity, cfg->exogenous, {}});
  DataTable table = load_csv(o.data, cols);
  std::string first = cfg ? cfg->first : "", last = cfg ? cfg->last : "";
  if (!o.rows.empty()) std::tie(first, last) = row_range(o.rows);
  if (!first.empty() || !last.empty()) table = select_rows(table, first, last);
  LoadedData out;
  if (exo) {
    const Eigen::Index c = table.column(cfg->exogenous);
    for (Eigen::Index r = 0; r < table.rows(); ++r) {
      const double v = table.values(r, c);
      if (v < 1 || v != std::floor(v))
        throw Error(ErrorKind::InvalidArgument, "exogenous level must be a positive integer at row " + std::to_string(r + 1));
      out.exogenous.push_back(static_cast<std::size_t>(v) - 1);
    }
    table.names.erase(table.names.begin() + c);
    table.transforms.erase(table.transforms.begin() + c);
    Matrix kept(table.rows(), table.values.cols() - 1);
    for (Eigen::Index j = 0, k = 0; j < table.values.cols(); ++j)
      if (j != c) kept.col(k++) = table.values.col(j);
    table.values = kept;
  }
  out.table = std::move(table);
  return out;
}

SpecConfig load_spec(const std::string& path) {
  if (path.empty()) throw Error(ErrorKind::InvalidArgument, "--model is required");
  return parse_spec(read_json_file(path));
}

PwaSvarModel load_model(const std::string& path) {
  if (path.empty()) throw Error(ErrorKind::InvalidArgument, "--model is required");
  const Json doc = read_json_file(path);
  // Estimation output embeds the fitted model.
  if (doc.is_object() && doc.contains("model") && doc.contains("parameters")) return parse_model(doc["model"]);
  return parse_model(doc);
}

std::string certificate_line(const InvertibilityCertificate& c) {
  std::string dets;
  for (double d : c.determinants) dets += (dets.empty() ? "" : ", ") + format_double(d);
  return std::string(c.invertible ? "invertible" : "not invertible") + " (sign " + std::to_string(c.sign) + ", det [" +
         dets + "])";
}

void check_dimensions(const DataTable& t, const ModelSpec& s) {
  if (static_cast<std::size_t>(t.values.cols()) != s.p)
    throw Error(ErrorKind::InvalidArgument, "data has " + std::to_string(t.values.cols()) + " columns, spec needs " +
                                                std::to_string(s.p));
}

int cmd_validate(const Options& o) {
  if (o.model.empty()) throw Error(ErrorKind::InvalidArgument, "--model is required");
  const Json doc = read_json_file(o.model);
  if (is_spec_document(doc)) {
    const SpecConfig cfg = parse_spec(doc);
    std::cout << "valid spec: p=" << cfg.spec.p << " k=" << cfg.spec.k << " regimes=" << cfg.spec.num_regimes()
              << " parameters=" << parameter_count(cfg.spec) << "\n";
    if (!o.out.empty()) write_text_file(out_file(o, "spec.json"), canonical_dump(spec_to_json(cfg.spec)));
    return 0;
  }
  const PwaSvarModel model = parse_model(doc);
  std::cout << "valid model: p=" << model.dim() << " k=" << model.lags_count() << " regimes=" << model.num_regimes()
            << " certificate " << certificate_line(model.certificate()) << "\n";
  if (!o.out.empty()) {
    Json out;
    out["certificate"] = certificate_to_json(model.certificate());
    out["lag_rank"] = lag_rank_diagnostic(model);
    out["model"] = model_to_json(model);
    write_text_file(out_file(o, "validation.json"), canonical_dump(out));
  }
  return 0;
}

int cmd_simulate(const Options& o) {
  const PwaSvarModel model = load_model(o.model);
  std::vector<Vector> init = o.history.empty()
                                 ? std::vector<Vector>(model.lags_count(), Vector::Zero(static_cast<Eigen::Index>(model.dim())))
                                 : parse_history(o.history, model.dim());
  const std::uint64_t seed = seed_of(o);
  const SimulationResult sim = simulate(model, init, o.periods, seed);
  const fs::path path = out_file(o, "simulation.csv");
  write_text_file(path, simulation_csv(sim));
  std::cout << "simulated " << o.periods << " periods with seed " << seed << " -> " << path.string() << "\n";
  return 0;
}

EstimationOptions estimation_options(const Options& o) {
  EstimationOptions opt;
  opt.restarts = o.restarts;
  opt.seed = seed_of(o);
  return opt;
}

int cmd_estimate(const Options& o) {
  const SpecConfig cfg = load_spec(o.model);
  const LoadedData data = load_data(o, cfg.data);
  check_dimensions(data.table, cfg.spec);
  const EstimationResult r = estimate_ml(cfg.spec, data.table.values, estimation_options(o), data.exogenous);
  write_text_file(out_file(o, "estimation.json"), canonical_dump(estimation_to_json(r)));
  write_text_file(out_file(o, "model.json"), canonical_dump(model_to_json(*r.model)));
  std::cout << "estimated " << r.params.size() << " parameters on " << data.table.rows()
            << " rows: log-likelihood " << format_double(r.log_likelihood)
            << (r.converged ? "" : " (not converged)") << "\n";
  if (cfg.spec.p == 2 && r.model->partition().is_threshold()) {
    const PhillipsScatter scatter = phillips_partial_residuals(*r.model, data.table.values);
    write_text_file(out_file(o, "partial_residuals.csv"), partial_residual_csv(scatter, data.table.periods));
    std::cout << "slopes:";
    for (double s : scatter.slopes) std::cout << " " << format_double(s);
    std::cout << "\n";
  }
  return 0;
}

int cmd_test(const Options& o) {
  const SpecConfig cfg = load_spec(o.model);
  const LoadedData data = load_data(o, cfg.data);
  check_dimensions(data.table, cfg.spec);
  const HypothesisReport report = test_hypotheses(cfg.spec, data.table.values, estimation_options(o), data.exogenous);
  Json out = lr_table_to_json(report);
  out["sample"] = {{"first", data.table.periods.front()}, {"last", data.table.periods.back()},
                   {"rows", data.table.rows()}};
  write_text_file(out_file(o, "lr_tests.json"), canonical_dump(out));
  for (const auto& row : report.rows)
    std::cout << row.hypothesis << " (" << row.test.df << "): " << format_lr(row.test) << "\n";
  return 0;
}

std::vector<Vector> history_from(const Options& o, const PwaSvarModel& model) {
  if (!o.history.empty()) return parse_history(o.history, model.dim());
  const std::size_t k = std::max<std::size_t>(model.lags_count(), 1);
  if (o.data.empty() || o.at.empty()) return std::vector<Vector>(k, Vector::Zero(static_cast<Eigen::Index>(model.dim())));
  std::optional<DataConfig> cfg;
  if (!o.spec.empty()) cfg = load_spec(o.spec).data;
  const DataTable t = load_data(o, cfg).table;
  if (static_cast<std::size_t>(t.values.cols()) != model.dim())
    throw Error(ErrorKind::InvalidArgument, "data columns do not match the model dimension");
  const auto it = std::find(t.periods.begin(), t.periods.end(), o.at);
  if (it == t.periods.end()) throw Error(ErrorKind::InvalidArgument, "period '" + o.at + "' not in the data");
  const auto row = static_cast<std::size_t>(it - t.periods.begin());
  if (row + 1 < k) throw Error(ErrorKind::InvalidArgument, "not enough rows before '" + o.at + "'");
  std::vector<Vector> h;
  for (std::size_t i = 0; i < k; ++i) h.push_back(t.values.row(static_cast<Eigen::Index>(row - i)).transpose());
  return h;
}

int cmd_irf(const Options& o) {
  const PwaSvarModel model = load_model(o.model);
  if (o.shock < 1 || o.shock > model.dim()) throw Error(ErrorKind::InvalidArgument, "--shock out of range");
  const std::vector<Vector> history = history_from(o, model);
  GirfOptions gopt;
  gopt.zero_future_shocks = o.zero_future;
  const std::uint64_t seed = seed_of(o);
  const GirfResult g = girf(model, history, o.shock - 1, o.size, o.horizon, o.draws, seed, gopt);
  write_text_file(out_file(o, "girf.csv"), girf_csv(g));
  std::cout << "girf: shock " << o.shock << ", horizon " << o.horizon << ", draws " << g.draws << ", seed " << seed;
  if (model.dim() == 2) {
    try {
      std::cout << ", cumulative multiplier " << format_double(cumulative_multiplier(g, 1, o.shock - 1, o.horizon));
    } catch (const Error&) {
      std::cout << ", cumulative multiplier undefined";
    }
  }
  std::cout << "\n";
  return 0;
}

Vector default_anchor(const PwaSvarModel& model) {
  const auto& part = model.partition();
  const auto p = static_cast<Eigen::Index>(model.dim());
  if (part.is_threshold()) {
    const auto& t = part.threshold_data();
    const double level = t.thresholds.empty() ? 1.0 : t.thresholds.front() - 1.0;
    return (t.direction * (level / t.direction.squaredNorm())).array() + 0.0;
  }
  return part.conic_data().basis.fullPivLu().solve(Vector::Ones(p));
}

int cmd_identify(const Options& o) {
  const PwaSvarModel model = load_model(o.model);
  const Vector z0 = o.anchor.empty() ? default_anchor(model) : to_vector(parse_list(o.anchor, "--anchor"));
  if (static_cast<std::size_t>(z0.size()) != model.dim())
    throw Error(ErrorKind::InvalidArgument, "--anchor needs " + std::to_string(model.dim()) + " values");
  const ReducedForm rf = orthogonal_reduced_form(model, z0);
  Json out;
  out["anchor"] = std::vector<double>(z0.data(), z0.data() + z0.size());
  auto rows = [](const Matrix& m) {
    Json j = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) j.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    return j;
  };
  out["q"] = rows(rf.normalization.q);
  out["l"] = rows(rf.normalization.l);
  out["reduced_form"] = model_to_json(rf.model);

  std::vector<Vector> variances;
  for (const auto& sd : model.shocks().sd) variances.push_back(sd.array().square());
  if (!variances.empty()) {
    const HeteroClass hc = hetero_identification_class(variances);
    const char* kind = hc.kind == HeteroClass::Kind::SignedPermutation ? "signed_permutation"
                       : hc.kind == HeteroClass::Kind::Block           ? "block"
                                                                       : "none_extra";
    out["heteroskedastic_class"] = kind;
  }
  std::cout << "reduced form at anchor computed";

  if (!o.compare.empty()) {
    const PwaSvarModel other = load_model(o.compare);
    const RotationMatch m = find_rotation(model, other, rotation_probes(model, seed_of(o)));
    out["comparison"] = {{"equivalent", m.equivalent}, {"residual", m.residual}, {"q", rows(m.q)}};
    std::cout << "; comparison " << (m.equivalent ? "equivalent" : "not equivalent") << " (residual "
              << format_double(m.residual) << ")";
  }
  if (!o.variances.empty()) {
    const Vector v = to_vector(parse_list(o.variances, "--variances"));
    if (v.size() != 2) throw Error(ErrorKind::InvalidArgument, "--variances needs two values");
    const auto admissible = admissible_rotations_2d(v, o.angles);
    Json list = Json::array();
    for (const auto& q : admissible) list.push_back(rows(q));
    out["angle_scan"] = {{"angles", o.angles}, {"admissible", admissible.size()}, {"rotations", list}};
    std::cout << "; angle scan " << admissible.size() << " of " << 2 * o.angles << " admissible";
  }
  if (!o.instrument.empty()) {
    std::optional<DataConfig> cfg;
    if (!o.spec.empty()) cfg = load_spec(o.spec).data;
    const LoadedData d = load_data(o, cfg);
    DataTable raw = load_csv(o.data, {{o.instrument, Transform::Identity, o.instrument, {}}});
    if (!o.rows.empty()) {
      const auto [f, l] = row_range(o.rows);
      raw = select_rows(raw, f, l);
    }
    const std::size_t k = model.lags_count();
    const Eigen::Index t = d.table.rows();
    if (static_cast<std::size_t>(d.table.values.cols()) != model.dim())
      throw Error(ErrorKind::InvalidArgument, "data columns do not match the model dimension");
    Matrix resid(t - static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(model.dim()));
    Vector w(resid.rows());
    for (Eigen::Index r = static_cast<Eigen::Index>(k); r < t; ++r) {
      std::vector<Vector> h;
      for (std::size_t i = 1; i <= k; ++i) h.push_back(d.table.values.row(r - static_cast<Eigen::Index>(i)).transpose());
      resid.row(r - static_cast<Eigen::Index>(k)) = structural_shock(rf.model, d.table.values.row(r).transpose(), h).transpose();
      w[r - static_cast<Eigen::Index>(k)] = raw.values(r, 0);
    }
    const InstrumentShock s = instrument_q1(resid, w);
    out["instrument"] = {{"column", o.instrument},
                         {"q1", std::vector<double>(s.q1.data(), s.q1.data() + s.q1.size())},
                         {"strength", s.strength}};
    std::cout << "; instrument strength " << format_double(s.strength);
  }
  std::cout << "\n";
  write_text_file(out_file(o, "identification.json"), canonical_dump(out));
  return 0;
}

int cmd_smooth_demo(const Options& o) {
  if (o.points < 2) throw Error(ErrorKind::InvalidArgument, "--points must be at least 2");
  const LogisticTransitionMap logistic = logistic_transition(o.a1, o.a2, o.scale);
  const PwaMap kink = PwaMap::threshold_affine({Vector::Ones(1), {0.0}}, {{Vector::Zero(1), Matrix::Constant(1, 1, o.a1)},
                                                                           {Vector::Zero(1), Matrix::Constant(1, 1, o.a2)}});
  const SmoothedThresholdMap smoothed = smooth_threshold_affine(kink, GaussianKernel(o.bandwidth));
  auto gauss = [&](double z) { return smoothed.evaluate(Vector::Constant(1, z))[0]; };
  std::string csv = "z,base,logistic,gaussian_smoothed\n";
  for (std::size_t i = 0; i < o.points; ++i) {
    const double z = o.lo + (o.hi - o.lo) * static_cast<double>(i) / static_cast<double>(o.points - 1);
    csv += format_double(z) + "," + format_double(logistic.kink(z)) + "," + format_double(logistic(z)) + "," +
           format_double(gauss(z)) + "\n";
  }
  write_text_file(out_file(o, "smooth_demo.csv"), csv);
  const auto ml = check_scalar_monotone(logistic, o.lo, o.hi, 20001);
  const auto mg = check_scalar_monotone(gauss, o.lo, o.hi, 20001);
  std::cout << "logistic " << (ml.monotone ? "monotone" : "not monotone");
  if (ml.violation) std::cout << " (near z=" << format_double(*ml.violation) << ")";
  std::cout << "; gaussian " << (mg.monotone ? "monotone" : "not monotone") << "\n";
  return 0;
}

int exit_code(const Error& e) { return e.kind() == ErrorKind::IoError ? 2 : 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Piecewise-affine SVAR toolkit"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* s) {
    s->add_option("--model", o.model, "Model or spec JSON");
    s->add_option("--out", o.out, "Output directory");
    s->add_option("--seed", o.seed, "Random seed (default: $PWASVAR_SEED or 0)");
  };
  auto with_data = [&](CLI::App* s) {
    s->add_option("--data", o.data, "CSV data file");
    s->add_option("--rows", o.rows, "Period range FIRST:LAST");
  };

  auto* validate = app.add_subcommand("validate", "Parse and certify a model or spec");
  common(validate);
  auto* sim = app.add_subcommand("simulate", "Simulate a model");
  common(sim);
  sim->add_option("--periods", o.periods, "Number of periods");
  sim->add_option("--history", o.history, "Initial history x1,y1;x2,y2 (most recent first)");
  auto* est = app.add_subcommand("estimate", "Maximum likelihood estimation");
  common(est);
  with_data(est);
  est->add_option("--restarts", o.restarts, "Random restarts");
  auto* test = app.add_subcommand("test", "Likelihood-ratio linearity tests");
  common(test);
  with_data(test);
  test->add_option("--restarts", o.restarts, "Random restarts");
  auto* irf = app.add_subcommand("irf", "Generalized impulse responses");
  common(irf);
  with_data(irf);
  irf->add_option("--spec", o.spec, "Spec whose data section maps the CSV columns");
  irf->add_option("--at", o.at, "Period label of the most recent history row");
  irf->add_option("--history", o.history, "History x1,y1;x2,y2 (most recent first)");
  irf->add_option("--horizon", o.horizon, "Horizon H");
  irf->add_option("--draws", o.draws, "Monte Carlo replicates");
  irf->add_option("--shock", o.shock, "Shocked equation (1-based)");
  irf->add_option("--size", o.size, "Shock size");
  irf->add_flag("--zero-future", o.zero_future, "Set future shocks to zero");
  auto* ident = app.add_subcommand("identify", "Orthogonal reduced form and rotation diagnostics");
  common(ident);
  with_data(ident);
  ident->add_option("--spec", o.spec, "Spec whose data section maps the CSV columns");
  ident->add_option("--anchor", o.anchor, "Anchor point for the reduced form");
  ident->add_option("--compare", o.compare, "Second model to align by rotation");
  ident->add_option("--variances", o.variances, "Two shock variances for the angle scan");
  ident->add_option("--angles", o.angles, "Grid size of the angle scan");
  ident->add_option("--instrument", o.instrument, "CSV column of an external instrument");
  auto* smooth = app.add_subcommand("smooth-demo", "Logistic versus Gaussian smoothing of a kink");
  smooth->add_option("--out", o.out, "Output directory");
  smooth->add_option("--a1", o.a1, "Slope below zero");
  smooth->add_option("--a2", o.a2, "Slope above zero");
  smooth->add_option("--scale", o.scale, "Logistic scale");
  smooth->add_option("--bandwidth", o.bandwidth, "Gaussian bandwidth");
  smooth->add_option("--lo", o.lo, "Grid start");
  smooth->add_option("--hi", o.hi, "Grid end");
  smooth->add_option("--points", o.points, "Grid points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*validate) return cmd_validate(o);
    if (*sim) return cmd_simulate(o);
    if (*est) return cmd_estimate(o);
    if (*test) return cmd_test(o);
    if (*irf) return cmd_irf(o);
    if (*ident) return cmd_identify(o);
    if (*smooth) return cmd_smooth_demo(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
