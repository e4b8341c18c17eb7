#include "pwasvar/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "pwasvar/error.hpp"

namespace pwasvar {

namespace {

[[noreturn]] void schema(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::SchemaError, path + ": " + what);
}

std::string at(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

const Json& need(const Json& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) schema(path.empty() ? "$" : path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema(at(path, key), "missing field");
  return *it;
}

const Json* maybe(const Json& obj, std::string_view key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double number(const Json& node, const std::string& path) {
  if (!node.is_number()) schema(path, "expected a number");
  return node.get<double>();
}

std::size_t count(const Json& node, const std::string& path) {
  if (!node.is_number_integer() || node.get<long long>() < 0) schema(path, "expected a non-negative integer");
  return node.get<std::size_t>();
}

/// 1-based index in the file, 0-based in the result.
std::size_t index1(const Json& node, std::size_t bound, const std::string& path) {
  const std::size_t v = count(node, path);
  if (v < 1 || v > bound) schema(path, "index must lie in 1.." + std::to_string(bound));
  return v - 1;
}

bool boolean(const Json& node, const std::string& path) {
  if (!node.is_boolean()) schema(path, "expected true or false");
  return node.get<bool>();
}

std::string text(const Json& node, const std::string& path) {
  if (!node.is_string()) schema(path, "expected a string");
  return node.get<std::string>();
}

Vector vector_of(const Json& node, std::size_t n, const std::string& path) {
  if (!node.is_array()) schema(path, "expected an array");
  if (node.size() != n) schema(path, "expected " + std::to_string(n) + " entries, got " + std::to_string(node.size()));
  Vector v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = number(node[i], at(path, i));
  return v;
}

Matrix matrix_of(const Json& node, std::size_t r, std::size_t c, const std::string& path) {
  if (!node.is_array()) schema(path, "expected an array of rows");
  if (node.size() != r) schema(path, "expected " + std::to_string(r) + " rows, got " + std::to_string(node.size()));
  Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < r; ++i) {
    const Json& row = node[i];
    if (!row.is_array() || row.size() != c)
      schema(path, "row " + std::to_string(i + 1) + " must have " + std::to_string(c) + " entries");
    for (std::size_t j = 0; j < c; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number(row[j], at(at(path, i), j));
  }
  return m;
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vector(m.row(i).transpose())));
  return out;
}

std::vector<Vector> sd_list(const Json& node, std::size_t p, const std::string& path) {
  if (!node.is_array() || node.empty()) schema(path, "expected a non-empty array of standard deviations");
  std::vector<Vector> sd;
  for (std::size_t g = 0; g < node.size(); ++g) sd.push_back(vector_of(node[g], p, at(path, g)));
  return sd;
}

SkedasticSpec shocks_from_json(const Json& node, std::size_t p, const std::string& path) {
  const std::string type = text(need(node, "type", path), at(path, "type"));
  if (type == "homoskedastic") return SkedasticSpec::homoskedastic();
  const auto sd = sd_list(need(node, "sd", path), p, at(path, "sd"));
  const std::size_t ref = maybe(node, "reference") ? index1(node["reference"], sd.size(), at(path, "reference")) : 0;
  if (type == "diagonal_regime") {
    const std::size_t lag = maybe(node, "lag") ? count(node["lag"], at(path, "lag")) : 1;
    return SkedasticSpec::diagonal_regime(lag, sd, ref);
  }
  if (type == "exogenous_dummy") return SkedasticSpec::exogenous_dummy(sd, ref);
  schema(at(path, "type"), "unknown shock type '" + type + "'");
}

Json shocks_to_json(const SkedasticSpec& s) {
  Json out;
  switch (s.kind) {
    case SkedasticSpec::Kind::Homoskedastic:
      out["type"] = "homoskedastic";
      return out;
    case SkedasticSpec::Kind::DiagonalRegime:
      out["type"] = "diagonal_regime";
      out["lag"] = s.lag;
      break;
    case SkedasticSpec::Kind::ExogenousDummy:
      out["type"] = "exogenous_dummy";
      break;
  }
  out["sd"] = Json::array();
  for (const auto& v : s.sd) out["sd"].push_back(to_json(v));
  out["reference"] = s.reference + 1;
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (double x : xs) out += (out.empty() ? "" : ", ") + format_double(x);
  return out;
}

[[noreturn]] void rethrow_validation(const Error& e, const PwaMap& f0) {
  if (e.kind() == ErrorKind::NotInvertible) {
    const auto cert = check_invertibility(f0);
    throw Error(ErrorKind::ValidationError,
                "f0 violates the determinant condition (every regime determinant must be nonzero and of one "
                "common sign); determinants: [" + join(cert.determinants) + "]");
  }
  throw Error(ErrorKind::ValidationError, e.what());
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

/// Sortable key for labels such as 1960Q1, 1960-03, 1960-03-31 or 1960.
std::optional<long> date_key(const std::string& label) {
  static const std::regex quarter(R"((\d{4})[Qq]([1-4]))");
  static const std::regex ymd(R"((\d{4})-(\d{1,2})(?:-(\d{1,2}))?)");
  static const std::regex year(R"((\d{4}))");
  std::smatch m;
  if (std::regex_match(label, m, quarter)) return std::stol(m[1]) * 10000 + std::stol(m[2]) * 300;
  if (std::regex_match(label, m, ymd))
    return std::stol(m[1]) * 10000 + std::stol(m[2]) * 100 + (m[3].matched ? std::stol(m[3]) : 0);
  if (std::regex_match(label, m, year)) return std::stol(m[1]) * 10000;
  return std::nullopt;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

RegimePartition partition_from_json(const Json& node, std::size_t p, const std::string& path) {
  const std::string type = text(need(node, "type", path), at(path, "type"));
  try {
    if (type == "threshold") {
      const Vector a = vector_of(need(node, "direction", path), p, at(path, "direction"));
      const Json& th = need(node, "thresholds", path);
      if (!th.is_array()) schema(at(path, "thresholds"), "expected an array");
      std::vector<double> taus;
      for (std::size_t i = 0; i < th.size(); ++i) taus.push_back(number(th[i], at(at(path, "thresholds"), i)));
      return RegimePartition::threshold(a, taus);
    }
    if (type == "conic") {
      const Matrix basis = matrix_of(need(node, "basis", path), p, p, at(path, "basis"));
      const std::size_t patterns = std::size_t{1} << p;
      std::vector<std::size_t> labels(patterns);
      if (const Json* lj = maybe(node, "labels")) {
        if (!lj->is_array() || lj->size() != patterns)
          schema(at(path, "labels"), "expected one label per sign pattern (" + std::to_string(patterns) + ")");
        for (std::size_t m = 0; m < patterns; ++m) labels[m] = index1((*lj)[m], patterns, at(at(path, "labels"), m));
      } else {
        for (std::size_t m = 0; m < patterns; ++m) labels[m] = m;
      }
      return RegimePartition::conic(basis, labels);
    }
    if (type == "none") return RegimePartition::whole_space(p);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SchemaError) throw;
    schema(path, e.what());
  }
  schema(at(path, "type"), "unknown partition type '" + type + "'");
}

Json partition_to_json(const RegimePartition& partition) {
  Json out;
  if (partition.is_threshold()) {
    const auto& t = partition.threshold_data();
    out["type"] = "threshold";
    out["direction"] = to_json(t.direction);
    out["thresholds"] = t.thresholds;
  } else {
    const auto& c = partition.conic_data();
    out["type"] = "conic";
    out["basis"] = to_json(c.basis);
    out["labels"] = Json::array();
    for (auto l : c.pattern_labels) out["labels"].push_back(l + 1);
  }
  return out;
}

PwaMap map_from_json(const Json& node, const RegimePartition& partition, std::size_t p, const std::string& path) {
  if (!node.is_array()) schema(path, "expected an array of regimes");
  if (node.size() != partition.num_regimes())
    schema(path, "expected " + std::to_string(partition.num_regimes()) + " regimes, got " + std::to_string(node.size()));
  std::vector<AffinePiece> pieces;
  for (std::size_t l = 0; l < node.size(); ++l) {
    const std::string rp = at(path, l);
    const Matrix m = matrix_of(need(node[l], "matrix", rp), p, p, at(rp, "matrix"));
    Vector b = Vector::Zero(static_cast<Eigen::Index>(p));
    if (const Json* ij = maybe(node[l], "intercept")) b = vector_of(*ij, p, at(rp, "intercept"));
    if (partition.is_conic() && b.norm() != 0.0) schema(at(rp, "intercept"), "conic maps are linear in every regime");
    pieces.push_back({b, m});
  }
  return PwaMap::on_partition(partition, std::move(pieces));
}

Json map_to_json(const PwaMap& map) {
  Json out = Json::array();
  for (const auto& piece : map.regimes())
    out.push_back({{"intercept", to_json(piece.intercept)}, {"matrix", to_json(piece.matrix)}});
  return out;
}

PwaSvarModel parse_model(const Json& doc) {
  if (!doc.is_object()) schema("$", "expected an object");
  if (const Json* kind = maybe(doc, "kind"); kind && *kind != "model") schema("kind", "expected \"model\"");
  const std::size_t version = count(need(doc, "schema_version", ""), "schema_version");
  if (version != static_cast<std::size_t>(kSchemaVersion))
    schema("schema_version", "unsupported version " + std::to_string(version));
  const std::size_t p = count(need(doc, "p", ""), "p");
  if (p < 1) schema("p", "must be at least 1");
  const std::size_t k = count(need(doc, "k", ""), "k");
  const RegimePartition partition = partition_from_json(need(doc, "partition", ""), p, "partition");
  PwaMap f0 = map_from_json(need(doc, "regimes", ""), partition, p, "regimes");

  const Json& lj = need(doc, "lags", "");
  if (!lj.is_array() || lj.size() != k) schema("lags", "expected " + std::to_string(k) + " lag maps");
  std::vector<PwaMap> lags;
  for (std::size_t i = 0; i < k; ++i) {
    const std::string lp = at("lags", i);
    lags.push_back(map_from_json(need(lj[i], "regimes", lp), partition, p, at(lp, "regimes")));
  }
  const Vector c = vector_of(need(doc, "intercept", ""), p, "intercept");
  SkedasticSpec shocks;
  if (const Json* sj = maybe(doc, "shocks")) shocks = shocks_from_json(*sj, p, "shocks");

  std::optional<PwaSvarModel> model;
  try {
    model.emplace(c, f0, std::move(lags), shocks);
  } catch (const Error& e) {
    rethrow_validation(e, f0);
  }

  if (const Json* nj = maybe(doc, "normalization")) {
    const std::string type = text(need(*nj, "type", "normalization"), "normalization.type");
    if (type == "lower_triangular") {
      const std::size_t anchor =
          maybe(*nj, "anchor") ? index1((*nj)["anchor"], partition.num_regimes(), "normalization.anchor") : 0;
      const Matrix& m = model->f0().regime(anchor).matrix;
      const double upper = m.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().cwiseAbs().maxCoeff();
      if (upper > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw Error(ErrorKind::ValidationError, "f0 is not lower triangular in regime " + std::to_string(anchor + 1));
    } else if (type != "none") {
      schema("normalization.type", "unknown normalization '" + type + "'");
    }
  }
  return std::move(*model);
}

PwaSvarModel parse_model_config(std::string_view text) { return parse_model(parse_json_text(text)); }

Json model_to_json(const PwaSvarModel& model) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["p"] = model.dim();
  out["k"] = model.lags_count();
  out["partition"] = partition_to_json(model.partition());
  out["regimes"] = map_to_json(model.f0());
  out["lags"] = Json::array();
  for (const auto& lag : model.lag_maps()) out["lags"].push_back({{"regimes", map_to_json(lag)}});
  out["intercept"] = to_json(model.intercept());
  out["shocks"] = shocks_to_json(model.shocks());
  return out;
}

bool is_spec_document(const Json& doc) { return doc.is_object() && doc.value("kind", "") == "spec"; }

SpecConfig parse_spec(const Json& doc) {
  if (!is_spec_document(doc)) schema("kind", "expected \"spec\"");
  if (const Json* v = maybe(doc, "schema_version"); v && count(*v, "schema_version") != 1)
    schema("schema_version", "unsupported version");
  SpecConfig out;
  ModelSpec& s = out.spec;
  s.p = count(need(doc, "p", ""), "p");
  if (s.p < 1) schema("p", "must be at least 1");
  s.k = count(need(doc, "k", ""), "k");
  if (const Json* j = maybe(doc, "threshold_variable")) s.threshold_variable = index1(*j, s.p, "threshold_variable");
  if (const Json* j = maybe(doc, "thresholds")) {
    if (!j->is_array()) schema("thresholds", "expected an array");
    s.thresholds.clear();
    for (std::size_t i = 0; i < j->size(); ++i) s.thresholds.push_back(number((*j)[i], at("thresholds", i)));
  }
  if (const Json* j = maybe(doc, "free_threshold")) s.free_threshold = boolean(*j, "free_threshold");
  if (const Json* j = maybe(doc, "regime_varying")) {
    if (!j->is_array() || j->size() != s.k + 1) schema("regime_varying", "expected k + 1 flags");
    s.regime_varying.clear();
    for (std::size_t i = 0; i < j->size(); ++i) s.regime_varying.push_back(boolean((*j)[i], at("regime_varying", i)));
  }
  if (const Json* nj = maybe(doc, "normalization")) {
    const std::string type = text(need(*nj, "type", "normalization"), "normalization.type");
    if (const Json* a = maybe(*nj, "anchor")) s.anchor_regime = index1(*a, s.num_regimes(), "normalization.anchor");
    if (type == "fixed_q") {
      s.normalization = ModelSpec::Normalization::FixedQ;
      s.fixed_q = matrix_of(need(*nj, "q", "normalization"), s.p, s.p, "normalization.q");
    } else if (type != "lower_triangular") {
      schema("normalization.type", "unknown normalization '" + type + "'");
    }
  }
  if (const Json* sj = maybe(doc, "shocks")) {
    const std::string type = text(need(*sj, "type", "shocks"), "shocks.type");
    if (type == "diagonal_regime") {
      s.skedastic = SkedasticSpec::Kind::DiagonalRegime;
      if (const Json* l = maybe(*sj, "lag")) s.skedastic_lag = count(*l, "shocks.lag");
    } else if (type == "exogenous_dummy") {
      s.skedastic = SkedasticSpec::Kind::ExogenousDummy;
      s.exogenous_levels = count(need(*sj, "levels", "shocks"), "shocks.levels");
    } else if (type != "homoskedastic") {
      schema("shocks.type", "unknown shock type '" + type + "'");
    }
    if (const Json* r = maybe(*sj, "reference"))
      s.skedastic_reference = index1(*r, std::max<std::size_t>(s.skedastic_groups(), 1), "shocks.reference");
  }
  if (const Json* dj = maybe(doc, "data")) {
    DataConfig data;
    if (const Json* cj = maybe(*dj, "columns")) {
      if (!cj->is_array()) schema("data.columns", "expected an array");
      for (std::size_t i = 0; i < cj->size(); ++i) {
        const std::string cp = at("data.columns", i);
        const Json& c = (*cj)[i];
        ColumnSpec col;
        col.name = text(need(c, "name", cp), at(cp, "name"));
        const std::string t = maybe(c, "transform") ? text(c["transform"], at(cp, "transform")) : "identity";
        if (t == "identity" || t == "log") {
          col.transform = t == "log" ? Transform::Log : Transform::Identity;
          col.source = maybe(c, "source") ? text(c["source"], at(cp, "source")) : col.name;
        } else if (t == "log_ratio") {
          col.transform = Transform::LogRatio;
          col.source = text(need(c, "numerator", cp), at(cp, "numerator"));
          col.denominator = text(need(c, "denominator", cp), at(cp, "denominator"));
        } else {
          schema(at(cp, "transform"), "unknown transform '" + t + "'");
        }
        data.columns.push_back(std::move(col));
      }
      if (data.columns.size() != s.p) schema("data.columns", "expected p = " + std::to_string(s.p) + " columns");
    }
    if (const Json* e = maybe(*dj, "exogenous")) data.exogenous = text(*e, "data.exogenous");
    if (const Json* f = maybe(*dj, "first")) data.first = text(*f, "data.first");
    if (const Json* l = maybe(*dj, "last")) data.last = text(*l, "data.last");
    out.data = std::move(data);
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ValidationError, e.what());
  }
  return out;
}

Json spec_to_json(const ModelSpec& s) {
  Json out;
  out["kind"] = "spec";
  out["schema_version"] = kSchemaVersion;
  out["p"] = s.p;
  out["k"] = s.k;
  out["threshold_variable"] = s.threshold_variable + 1;
  out["thresholds"] = s.thresholds;
  out["free_threshold"] = s.free_threshold;
  Json varying = Json::array();
  for (std::size_t i = 0; i <= s.k; ++i) varying.push_back(s.varying(i));
  out["regime_varying"] = varying;
  Json norm;
  norm["anchor"] = s.anchor_regime + 1;
  if (s.normalization == ModelSpec::Normalization::FixedQ) {
    norm["type"] = "fixed_q";
    norm["q"] = to_json(s.fixed_q);
  } else {
    norm["type"] = "lower_triangular";
  }
  out["normalization"] = norm;
  Json shocks;
  switch (s.skedastic) {
    case SkedasticSpec::Kind::Homoskedastic: shocks["type"] = "homoskedastic"; break;
    case SkedasticSpec::Kind::DiagonalRegime:
      shocks["type"] = "diagonal_regime";
      shocks["lag"] = s.skedastic_lag;
      shocks["reference"] = s.skedastic_reference + 1;
      break;
    case SkedasticSpec::Kind::ExogenousDummy:
      shocks["type"] = "exogenous_dummy";
      shocks["levels"] = s.exogenous_levels;
      shocks["reference"] = s.skedastic_reference + 1;
      break;
  }
  out["shocks"] = shocks;
  return out;
}

Json parse_json_text(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::SchemaError, std::string("$: invalid JSON: ") + e.what());
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

std::string canonical_dump(const Json& doc) { return doc.dump(2) + "\n"; }

std::string canonicalize(std::string_view text) { return canonical_dump(parse_json_text(text)); }

Eigen::Index DataTable::column(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorKind::MissingColumn, "no column '" + name + "'");
  return it - names.begin();
}

DataTable parse_csv(std::string_view text, const std::vector<ColumnSpec>& columns) {
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    if (!trim(line).empty()) rows.push_back(split_line(line));
    pos = nl + 1;
  }
  if (rows.empty()) throw Error(ErrorKind::MissingColumn, "empty file, no header row");
  const auto header = rows.front();
  auto find = [&](const std::string& name) {
    for (std::size_t j = 1; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw Error(ErrorKind::MissingColumn, "column '" + name + "' is not in the header");
  };
  std::vector<ColumnSpec> cols = columns;
  if (cols.empty())
    for (std::size_t j = 1; j < header.size(); ++j) cols.push_back({header[j], Transform::Identity, header[j], {}});
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  for (auto& c : cols) {
    if (c.source.empty()) c.source = c.name;
    idx.emplace_back(find(c.source), c.transform == Transform::LogRatio ? find(c.denominator) : 0);
  }

  DataTable out;
  out.names.reserve(cols.size());
  for (const auto& c : cols) {
    out.names.push_back(c.name);
    out.transforms.push_back(c.transform);
  }
  const std::size_t n = rows.size() - 1;
  out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = rows[r + 1];
    out.periods.push_back(row.empty() ? std::string() : row[0]);
    auto cell = [&](std::size_t j) {
      const std::string s = j < row.size() ? row[j] : std::string();
      const auto v = parse_number(s);
      if (!v || !std::isfinite(*v))
        throw Error(ErrorKind::NonNumericCell,
                    "row " + std::to_string(r + 1) + ", column '" + header[j] + "': '" + s + "'");
      return *v;
    };
    auto positive = [&](double v, std::size_t j) {
      if (!(v > 0.0))
        throw Error(ErrorKind::NonPositiveForLog,
                    "row " + std::to_string(r + 1) + ", column '" + header[j] + "': " + format_double(v));
      return v;
    };
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto [j, d] = idx[c];
      double v = cell(j);
      switch (cols[c].transform) {
        case Transform::Identity: break;
        case Transform::Log: v = std::log(positive(v, j)); break;
        case Transform::LogRatio: {
          const double den = cell(d);
          v = std::log(positive(v, j)) - std::log(positive(den, d));
          break;
        }
      }
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }

  std::vector<long> keys;
  for (const auto& label : out.periods) {
    const auto key = date_key(label);
    if (!key) {
      keys.clear();
      break;
    }
    keys.push_back(*key);
  }
  for (std::size_t r = 1; r < keys.size(); ++r)
    if (keys[r] <= keys[r - 1])
      throw Error(ErrorKind::InvalidArgument, "period labels are not strictly increasing at row " +
                                                  std::to_string(r + 1) + " ('" + out.periods[r] + "')");
  return out;
}

DataTable load_csv(const std::filesystem::path& path, const std::vector<ColumnSpec>& columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), columns);
}

DataTable select_rows(const DataTable& table, const std::string& first, const std::string& last) {
  auto locate = [&](const std::string& label, bool lower) -> std::size_t {
    const std::size_t n = table.periods.size();
    if (label.empty()) return lower ? 0 : n;
    for (std::size_t r = 0; r < n; ++r)
      if (table.periods[r] == label) return lower ? r : r + 1;
    const auto key = date_key(label);
    if (key) {
      std::size_t r = 0;
      if (lower) {
        while (r < n && date_key(table.periods[r]).value_or(0) < *key) ++r;
      } else {
        while (r < n && date_key(table.periods[r]).value_or(0) <= *key) ++r;
      }
      return r;
    }
    throw Error(ErrorKind::InvalidArgument, "period '" + label + "' not found");
  };
  const std::size_t b = locate(first, true), e = locate(last, false);
  if (e <= b) throw Error(ErrorKind::InvalidArgument, "row range " + first + ":" + last + " is empty");
  DataTable out;
  out.names = table.names;
  out.transforms = table.transforms;
  out.periods.assign(table.periods.begin() + static_cast<std::ptrdiff_t>(b),
                     table.periods.begin() + static_cast<std::ptrdiff_t>(e));
  out.values = table.values.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b));
  return out;
}

std::string table_to_csv(const DataTable& table) {
  std::string out = "period";
  for (const auto& n : table.names) out += "," + n;
  out += "\n";
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    out += table.periods[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) out += "," + format_double(table.values(r, c));
    out += "\n";
  }
  return out;
}

std::string simulation_csv(const SimulationResult& sim) {
  const Eigen::Index p = sim.path.cols();
  std::string out = "t";
  for (Eigen::Index j = 1; j <= p; ++j) out += ",z_" + std::to_string(j);
  out += ",regime";
  for (Eigen::Index j = 1; j <= p; ++j) out += ",eps_" + std::to_string(j);
  out += "\n";
  for (Eigen::Index t = 0; t < sim.path.rows(); ++t) {
    out += std::to_string(t + 1);
    for (Eigen::Index j = 0; j < p; ++j) out += "," + format_double(sim.path(t, j));
    out += "," + std::to_string(sim.regimes[static_cast<std::size_t>(t)] + 1);
    for (Eigen::Index j = 0; j < p; ++j) out += "," + format_double(sim.shocks(t, j));
    out += "\n";
  }
  return out;
}

std::string girf_csv(const GirfResult& g) {
  std::string out = "h,variable,mean,mc_se\n";
  for (Eigen::Index h = 0; h < g.response.rows(); ++h)
    for (Eigen::Index j = 0; j < g.response.cols(); ++j)
      out += std::to_string(h) + "," + std::to_string(j + 1) + "," + format_double(g.response(h, j)) + "," +
             format_double(g.mc_se(h, j)) + "\n";
  return out;
}

std::string partial_residual_csv(const PhillipsScatter& scatter, const std::vector<std::string>& periods) {
  std::string out = periods.empty() ? "t" : "t,period";
  out += ",log_theta,adjusted_inflation,regime\n";
  for (const auto& pt : scatter.points) {
    out += std::to_string(pt.t + 1);
    if (!periods.empty()) out += "," + periods.at(pt.t);
    out += "," + format_double(pt.log_theta) + "," + format_double(pt.adjusted_inflation) + "," +
           std::to_string(pt.regime + 1) + "\n";
  }
  return out;
}

Json certificate_to_json(const InvertibilityCertificate& cert) {
  Json out;
  out["invertible"] = cert.invertible;
  out["sign"] = cert.sign;
  out["indexed_by"] = cert.per_pattern ? "sign_pattern" : "regime";
  out["determinants"] = cert.determinants;
  Json failing = Json::array();
  for (auto f : cert.failing) failing.push_back(f + 1);
  out["failing"] = failing;
  return out;
}

Json estimation_to_json(const EstimationResult& r) {
  Json out;
  out["spec"] = spec_to_json(r.spec);
  Json params = Json::array();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    Json row{{"name", r.names[i]}, {"estimate", r.params[ii]}};
    const double se = ii < r.std_errors.size() ? r.std_errors[ii] : std::nan("");
    row["std_error"] = std::isfinite(se) ? Json(se) : Json(nullptr);
    params.push_back(row);
  }
  out["parameters"] = params;
  out["log_likelihood"] = r.log_likelihood;
  out["converged"] = r.converged;
  out["restarts"] = r.restarts;
  out["successful_starts"] = r.successful_starts;
  out["gradient_norm"] = r.gradient_norm;
  out["seed"] = r.seed;
  out["certificate"] = certificate_to_json(r.certificate);
  if (r.model) out["model"] = model_to_json(*r.model);
  return out;
}

Json lr_table_to_json(const HypothesisReport& report) {
  Json out;
  Json rows = Json::array();
  for (const auto& row : report.rows)
    rows.push_back({{"hypothesis", row.hypothesis},
                    {"restrictions", row.test.df},
                    {"statistic", row.test.statistic},
                    {"p_value", row.test.p_value},
                    {"formatted", format_lr(row.test)},
                    {"clamped", row.test.clamped}});
  out["rows"] = rows;
  out["log_likelihood"] = {{"unrestricted", report.unrestricted.log_likelihood},
                           {"no_switching", report.no_switching.log_likelihood},
                           {"linear", report.linear.log_likelihood}};
  return out;
}

}  // namespace pwasvar
