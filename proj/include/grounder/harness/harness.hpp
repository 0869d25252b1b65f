#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "grounder/automaton/automaton.hpp"
#include "grounder/backends/transport.hpp"
#include "grounder/spatial/mask.hpp"

namespace grounder::harness {

struct SchemaError : std::runtime_error {
    SchemaError(std::size_t entry_index, const std::string& field, const std::string& detail)
        : std::runtime_error("dataset entry " + std::to_string(entry_index) + ", field '" +
                             field + "': " + detail),
          index(entry_index),
          field(field) {}
    std::size_t index;
    std::string field;
};

struct DatasetEntry {
    std::string id;
    std::string image_path;
    std::string query;
    std::optional<spatial::BoundingBox> gt_box;
    std::optional<spatial::Bitmask> gt_mask;
};

/// Parses and validates the dataset JSON array; entry order is preserved.
std::vector<DatasetEntry> load_dataset(const std::string& path);

struct SampleRecord {
    std::string id;
    bool failed = false;
    std::string error;
    double iou = 0.0;  // box IoU against gt_box; 0 when failed or no gt_box
    bool hit = false;  // iou >= 0.5
    long long mask_intersection = 0;
    long long mask_union = 0;
    nlohmann::json result;  // GroundingResult JSON; null when failed
};

struct Metrics {
    double accuracy_at_50 = 0.0;
    double mean_iou = 0.0;
    std::optional<double> ciou;
};

struct EvalReport {
    int n_total = 0;
    int n_failed = 0;
    double failure_rate = 0.0;
    Metrics including_errors;  // failures score 0, denominator n_total
    Metrics excluding_errors;  // failures dropped
    std::vector<SampleRecord> samples;
};

struct EvalOptions {
    automaton::AutomatonConfig automaton;
    int parallelism = 1;
    double sample_timeout_seconds = 120.0;  // overruns are marked failed
};

/// Runs the pipeline over every entry with a work pool; sample results merge
/// in dataset order, so replayed reports are byte-identical at any
/// parallelism.
EvalReport evaluate(const std::vector<DatasetEntry>& entries, backends::BackendSuite& suite,
                    const EvalOptions& options = {});

inline constexpr int kReportSchemaVersion = 1;

/// Stable, versioned report schema; wall-clock totals go to standard error,
/// never into the JSON.
nlohmann::json report_to_json(const EvalReport& report);

struct Config {
    automaton::AutomatonConfig automaton;
    std::map<std::string, backends::BackendConfig> roles;
    int parallelism = 1;
    double sample_timeout_seconds = 120.0;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// INI-style config: [automaton] and [backends.<role>] sections, key = value
/// lines, '#' or ';' comments.
Config parse_config_text(const std::string& text);
Config load_config(const std::string& path);

}  // namespace grounder::harness
