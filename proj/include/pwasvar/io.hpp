#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pwasvar/estimation.hpp"
#include "pwasvar/identification.hpp"
#include "pwasvar/irf.hpp"
#include "pwasvar/model.hpp"

namespace pwasvar {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);

/// Model document. Regime, label and reference indices are 1-based in files.
///
///   {"schema_version": 1, "p": 2, "k": 1,
///    "partition": {"type": "threshold", "direction": [1, 0], "thresholds": [0]},
///    "regimes": [{"intercept": [0, 0], "matrix": [[1, 0], [-0.5, 1]]}, ...],
///    "lags": [{"regimes": [...]}],
///    "intercept": [0, 0.2],
///    "shocks": {"type": "homoskedastic"}}
///
/// Conic partitions use {"type": "conic", "basis": [[...]], "labels": [...]}, one
/// label per sign pattern. Throws Error(SchemaError) with the JSON path of the
/// offending field, or Error(ValidationError) when continuity or the determinant
/// condition fails.
PwaSvarModel parse_model(const Json& doc);
PwaSvarModel parse_model_config(std::string_view text);
Json model_to_json(const PwaSvarModel& model);

Json map_to_json(const PwaMap& map);
PwaMap map_from_json(const Json& node, const RegimePartition& partition, std::size_t p, const std::string& path);
Json partition_to_json(const RegimePartition& partition);
RegimePartition partition_from_json(const Json& node, std::size_t p, const std::string& path);

enum class Transform { Identity, Log, LogRatio };

struct ColumnSpec {
  std::string name;
  Transform transform = Transform::Identity;
  std::string source;       // defaults to name
  std::string denominator;  // LogRatio only
};

struct DataConfig {
  std::vector<ColumnSpec> columns;
  std::string exogenous;  // column holding 1-based integer levels
  std::string first;      // inclusive period labels; empty means open
  std::string last;
};

struct SpecConfig {
  ModelSpec spec;
  std::optional<DataConfig> data;
};

/// {"kind": "spec", "p", "k", "threshold_variable", "thresholds", "free_threshold",
///  "regime_varying", "normalization": {"type": "lower_triangular" | "fixed_q", ...},
///  "shocks": {...}, "data": {...}}
SpecConfig parse_spec(const Json& doc);
Json spec_to_json(const ModelSpec& spec);

bool is_spec_document(const Json& doc);
Json parse_json_text(std::string_view text);
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Sorted keys, two-space indent, shortest round-trip floats.
std::string canonicalize(std::string_view text);
std::string canonical_dump(const Json& doc);

struct DataTable {
  std::vector<std::string> periods;
  std::vector<std::string> names;
  Matrix values;  // rows x columns
  std::vector<Transform> transforms;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index column(const std::string& name) const;
};

/// Comma-separated values with a header row; the first column holds period labels.
/// An empty column list maps every remaining column unchanged. Throws MissingColumn,
/// NonNumericCell, NonPositiveForLog (rows are 1-based data rows, columns header
/// names) or IoError; InvalidArgument when parseable dates do not strictly increase.
DataTable load_csv(const std::filesystem::path& path, const std::vector<ColumnSpec>& columns = {});
DataTable parse_csv(std::string_view text, const std::vector<ColumnSpec>& columns = {});

/// Rows whose labels lie in [first, last]; empty bounds are open.
DataTable select_rows(const DataTable& table, const std::string& first, const std::string& last);

std::string table_to_csv(const DataTable& table);

std::string simulation_csv(const SimulationResult& sim);
std::string girf_csv(const GirfResult& girf);
std::string partial_residual_csv(const PhillipsScatter& scatter, const std::vector<std::string>& periods = {});

Json certificate_to_json(const InvertibilityCertificate& cert);
Json estimation_to_json(const EstimationResult& result);
/// Rows shaped like a likelihood-ratio table: hypothesis, restrictions, statistic,
/// p_value and the "stat [p]" string.
Json lr_table_to_json(const HypothesisReport& report);

}  // namespace pwasvar
