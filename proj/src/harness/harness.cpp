#include "grounder/harness/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

namespace grounder::harness {
namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

spatial::BoundingBox box_from_json(std::size_t index, const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4 || !std::all_of(j.begin(), j.end(), [](const auto& v) {
            return v.is_number();
        })) {
        throw SchemaError(index, "gt_box", "expected [x1,y1,x2,y2]");
    }
    spatial::BoundingBox box{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
    if (!box.valid()) throw SchemaError(index, "gt_box", "degenerate box");
    return box;
}

spatial::Bitmask mask_from_entry(std::size_t index, const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("w") || !j.contains("h") || !j.contains("counts")) {
        throw SchemaError(index, "gt_mask", "expected {w, h, counts}");
    }
    const int w = j["w"].get<int>();
    const int h = j["h"].get<int>();
    if (w <= 0 || h <= 0) throw SchemaError(index, "gt_mask", "non-positive dimensions");
    std::vector<int> counts;
    for (const auto& c : j["counts"]) {
        if (!c.is_number_integer() || c.get<int>() < 0) {
            throw SchemaError(index, "gt_mask", "counts must be non-negative integers");
        }
        counts.push_back(c.get<int>());
    }
    try {
        return spatial::rle_decode(w, h, counts);
    } catch (const spatial::RleError& e) {
        throw SchemaError(index, "gt_mask", e.what());
    }
}

}  // namespace

std::vector<DatasetEntry> load_dataset(const std::string& path) {
    nlohmann::json root;
    try {
        root = read_json_file(path);
    } catch (const std::exception& e) {
        throw SchemaError(0, "(file)", e.what());
    }
    if (!root.is_array()) throw SchemaError(0, "(file)", "top level must be an array");

    std::vector<DatasetEntry> entries;
    for (std::size_t i = 0; i < root.size(); ++i) {
        const nlohmann::json& j = root[i];
        if (!j.is_object()) throw SchemaError(i, "(entry)", "must be an object");
        DatasetEntry e;
        for (const char* field : {"id", "image", "query"}) {
            if (!j.contains(field) || !j[field].is_string()) {
                throw SchemaError(i, field, "required string field");
            }
        }
        e.id = j["id"].get<std::string>();
        e.image_path = j["image"].get<std::string>();
        e.query = j["query"].get<std::string>();
        if (e.query.empty()) throw SchemaError(i, "query", "must be non-empty");
        if (j.contains("gt_box") && !j["gt_box"].is_null()) {
            e.gt_box = box_from_json(i, j["gt_box"]);
        }
        if (j.contains("gt_mask") && !j["gt_mask"].is_null()) {
            e.gt_mask = mask_from_entry(i, j["gt_mask"]);
        }
        if (!e.gt_box && !e.gt_mask) {
            throw SchemaError(i, "gt_box", "entry needs gt_box or gt_mask");
        }
        if (!std::filesystem::exists(e.image_path)) {
            throw SchemaError(i, "image", "file not found: " + e.image_path);
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

namespace {

SampleRecord run_sample(const DatasetEntry& entry, backends::BackendSuite& suite,
                        const EvalOptions& options) {
    SampleRecord rec;
    rec.id = entry.id;
    const auto start = std::chrono::steady_clock::now();
    try {
        const auto image = backends::ImageHandle::from_file(entry.image_path);
        automaton::GroundingResult result =
            automaton::run(image, entry.query, suite, options.automaton);
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed > options.sample_timeout_seconds) {
            rec.failed = true;
            rec.error = "sample exceeded timeout";
            return rec;
        }
        if (!result.target) {
            rec.failed = true;
            rec.error = result.note.empty() ? "no target produced" : result.note;
            return rec;
        }
        rec.result = automaton::result_to_json(result);
        if (entry.gt_box) {
            rec.iou = spatial::box_iou(result.target->box, *entry.gt_box);
            rec.hit = rec.iou >= 0.5;
        }
        if (entry.gt_mask) {
            spatial::Bitmask pred =
                result.mask ? *result.mask
                            : spatial::Bitmask::from_box(entry.gt_mask->width,
                                                         entry.gt_mask->height,
                                                         result.target->box);
            const auto [inter, uni] = spatial::mask_intersection_union(pred, *entry.gt_mask);
            rec.mask_intersection = inter;
            rec.mask_union = uni;
        }
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
    }
    return rec;
}

Metrics compute_metrics(const std::vector<SampleRecord>& samples, bool include_failures,
                        bool any_mask) {
    Metrics m;
    int n = 0;
    int hits = 0;
    double iou_sum = 0.0;
    long long inter = 0;
    long long uni = 0;
    for (const SampleRecord& s : samples) {
        if (s.failed && !include_failures) continue;
        ++n;
        if (!s.failed) {
            hits += s.hit ? 1 : 0;
            iou_sum += s.iou;
            inter += s.mask_intersection;
            uni += s.mask_union;
        }
    }
    if (n > 0) {
        m.accuracy_at_50 = static_cast<double>(hits) / n;
        m.mean_iou = iou_sum / n;
    }
    if (any_mask && uni > 0) m.ciou = static_cast<double>(inter) / uni;
    return m;
}

}  // namespace

EvalReport evaluate(const std::vector<DatasetEntry>& entries, backends::BackendSuite& suite,
                    const EvalOptions& options) {
    if (options.parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
    const auto start = std::chrono::steady_clock::now();

    std::vector<SampleRecord> samples(entries.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= entries.size()) return;
            samples[i] = run_sample(entries[i], suite, options);
        }
    };
    const int threads = std::min<int>(options.parallelism, static_cast<int>(entries.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    EvalReport report;
    report.n_total = static_cast<int>(entries.size());
    report.n_failed = static_cast<int>(
        std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.failed; }));
    report.failure_rate =
        report.n_total ? static_cast<double>(report.n_failed) / report.n_total : 0.0;
    const bool any_mask =
        std::any_of(entries.begin(), entries.end(), [](const auto& e) { return e.gt_mask.has_value(); });
    report.including_errors = compute_metrics(samples, true, any_mask);
    report.excluding_errors = compute_metrics(samples, false, any_mask);
    report.samples = std::move(samples);

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "evaluate: %d samples, %d failed, %.3f s\n", report.n_total,
                 report.n_failed, elapsed);
    return report;
}

namespace {

nlohmann::json metrics_to_json(const Metrics& m) {
    nlohmann::json j;
    j["accuracy_at_50"] = m.accuracy_at_50;
    j["mean_iou"] = m.mean_iou;
    j["ciou"] = m.ciou ? nlohmann::json(*m.ciou) : nlohmann::json();
    return j;
}

}  // namespace

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["version"] = kReportSchemaVersion;
    j["n_total"] = report.n_total;
    j["n_failed"] = report.n_failed;
    j["failure_rate"] = report.failure_rate;
    j["including_errors"] = metrics_to_json(report.including_errors);
    j["excluding_errors"] = metrics_to_json(report.excluding_errors);
    nlohmann::json samples = nlohmann::json::array();
    for (const SampleRecord& s : report.samples) {
        nlohmann::json rec;
        rec["id"] = s.id;
        rec["failed"] = s.failed;
        rec["error"] = s.error;
        rec["iou"] = s.iou;
        rec["hit"] = s.hit;
        rec["mask_intersection"] = s.mask_intersection;
        rec["mask_union"] = s.mask_union;
        rec["result"] = s.result;
        samples.push_back(std::move(rec));
    }
    j["samples"] = samples;
    return j;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out{};
    if (!(in >> out) || !(in >> std::ws).eof()) {
        throw ConfigError("invalid numeric value for " + key + ": " + value);
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("invalid boolean value for " + key + ": " + value);
}

}  // namespace

Config parse_config_text(const std::string& text) {
    Config config;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section == "automaton") {
            auto& a = config.automaton;
            if (key == "max_retries") a.max_retries = parse_number<int>(key, value);
            else if (key == "confidence_floor") a.confidence_floor = parse_number<double>(key, value);
            else if (key == "max_pairs") a.max_pairs = parse_number<int>(key, value);
            else if (key == "candidate_floor") a.candidate_floor = parse_number<double>(key, value);
            else if (key == "grounding_cap") a.grounding_cap = parse_number<std::size_t>(key, value);
            else if (key == "enable_self_correction") a.enable_self_correction = parse_bool(key, value);
            else if (key == "enable_logic") a.enable_logic = parse_bool(key, value);
            else if (key == "enable_answerer") a.enable_answerer = parse_bool(key, value);
            else if (key == "enable_captioner") a.enable_captioner = parse_bool(key, value);
            else throw ConfigError("unknown [automaton] key: " + key);
        } else if (section == "harness") {
            if (key == "parallelism") config.parallelism = parse_number<int>(key, value);
            else if (key == "sample_timeout_seconds") {
                config.sample_timeout_seconds = parse_number<double>(key, value);
            } else throw ConfigError("unknown [harness] key: " + key);
        } else if (section.rfind("backends.", 0) == 0) {
            const std::string role = section.substr(std::string("backends.").size());
            if (role.empty()) throw ConfigError("empty backend role in section header");
            auto& b = config.roles[role];
            if (key == "endpoint") b.endpoint = value;
            else if (key == "model") b.model = value;
            else if (key == "credential_env") b.credential_env = value;
            else if (key == "timeout_seconds") b.timeout_seconds = parse_number<int>(key, value);
            else if (key == "transport_retries") b.transport_retries = parse_number<int>(key, value);
            else if (key == "max_tokens") b.max_tokens = parse_number<int>(key, value);
            else throw ConfigError("unknown backend key: " + key);
        } else {
            throw ConfigError("line " + std::to_string(lineno) + ": key outside known section");
        }
    }
    if (config.automaton.max_retries <= 0 || config.automaton.confidence_floor <= 0 ||
        config.automaton.max_pairs <= 0 || config.automaton.candidate_floor <= 0) {
        throw ConfigError("[automaton] values must be positive");
    }
    return config;
}

Config load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace grounder::harness
