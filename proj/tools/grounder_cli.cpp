#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "grounder/automaton/automaton.hpp"
#include "grounder/backends/replay.hpp"
#include "grounder/backends/transport.hpp"
#include "grounder/harness/harness.hpp"
#include "grounder/imaging/image.hpp"
#include "grounder/validation/annotate.hpp"

namespace {

using namespace grounder;

struct CommonOpts {
    std::string config_path;
    std::string record_dir;
    std::string replay_dir;
};

harness::Config load_config_or_default(const CommonOpts& opts) {
    if (opts.config_path.empty()) return {};
    return harness::load_config(opts.config_path);
}

/// Builds the suite stack: transport (or nothing) wrapped for recording, or a
/// pure replay suite.
std::shared_ptr<backends::BackendSuite> make_suite(const CommonOpts& opts,
                                                   const harness::Config& config) {
    if (!opts.replay_dir.empty()) {
        auto store = std::make_shared<backends::ReplayStore>(opts.replay_dir, false);
        return std::make_shared<backends::ReplaySuite>(store);
    }
    if (config.roles.empty()) {
        throw std::runtime_error(
            "no backends configured; pass --config with [backends.<role>] sections or --replay");
    }
    std::shared_ptr<backends::BackendSuite> suite =
        std::make_shared<backends::TransportSuite>(config.roles);
    if (!opts.record_dir.empty()) {
        auto store = std::make_shared<backends::ReplayStore>(opts.record_dir, true);
        store->set_has_segmenter(suite->has_segmenter());
        suite = std::make_shared<backends::RecordingSuite>(suite, store);
    }
    return suite;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

int cmd_ground(const CommonOpts& common, const std::string& image_path,
               const std::string& query, const std::string& out_path,
               const std::string& annotate_path) {
    const harness::Config config = load_config_or_default(common);
    auto suite = make_suite(common, config);
    const auto image = backends::ImageHandle::from_file(image_path);
    const automaton::GroundingResult result =
        automaton::run(image, query, *suite, config.automaton);
    const nlohmann::json j = automaton::result_to_json(result);
    if (out_path.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(out_path, j);
    }
    if (!annotate_path.empty() && result.target) {
        const imaging::Image marked =
            validation::annotate_candidate(image.pixels, result.target->box);
        imaging::write_file(annotate_path, imaging::encode_png(marked));
    }
    return result.target ? 0 : 2;
}

int cmd_eval(const CommonOpts& common, const std::string& dataset_path, int parallel,
             const std::string& report_path) {
    const harness::Config config = load_config_or_default(common);
    auto suite = make_suite(common, config);
    const auto entries = harness::load_dataset(dataset_path);
    harness::EvalOptions options;
    options.automaton = config.automaton;
    options.parallelism = parallel > 0 ? parallel : config.parallelism;
    options.sample_timeout_seconds = config.sample_timeout_seconds;
    const harness::EvalReport report = harness::evaluate(entries, *suite, options);
    const nlohmann::json j = harness::report_to_json(report);
    if (report_path.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(report_path, j);
    }
    return 0;
}

int cmd_trace(const std::string& result_path) {
    std::ifstream in(result_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + result_path);
    nlohmann::json j;
    in >> j;
    if (!j.contains("trace") || !j["trace"].is_array()) {
        throw std::runtime_error("no trace array in " + result_path);
    }
    for (const auto& e : j["trace"]) {
        const int row = e.at("row").get<int>();
        const char* condition = "?";
        for (const automaton::RowInfo& info : automaton::transition_table()) {
            if (info.row == row) condition = info.condition;
        }
        std::printf("step %2d  row %2d  %-15s -> %-15s  [%s]  %s\n",
                    e.at("step").get<int>(), row,
                    e.at("from").get<std::string>().c_str(),
                    e.at("to").get<std::string>().c_str(), condition,
                    e.at("condition_snapshot").get<std::string>().c_str());
    }
    std::printf("status: %s\n", j.value("status", std::string("?")).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"referring-expression grounding pipeline"};
    app.require_subcommand(1);
    CommonOpts common;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "config file");
        sub->add_option("--record", common.record_dir, "record backend calls into DIR");
        sub->add_option("--replay", common.replay_dir, "replay backend calls from DIR");
    };

    std::string image_path, query, out_path, annotate_path;
    CLI::App* ground = app.add_subcommand("ground", "ground one query in one image");
    ground->add_option("--image", image_path, "input image (PNG)")->required();
    ground->add_option("--query", query, "referring expression")->required();
    ground->add_option("--out", out_path, "result JSON path (default: stdout)");
    ground->add_option("--annotate", annotate_path, "write annotated PNG of the target");
    add_common(ground);

    std::string dataset_path, report_path;
    int parallel = 0;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a dataset");
    eval->add_option("--dataset", dataset_path, "dataset JSON")->required();
    eval->add_option("--parallel", parallel, "worker threads");
    eval->add_option("--report", report_path, "report JSON path (default: stdout)");
    add_common(eval);

    std::string result_path;
    CLI::App* trace = app.add_subcommand("trace", "pretty-print a result's transition trace");
    trace->add_option("--result", result_path, "result JSON from `ground`")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (ground->parsed()) {
            return cmd_ground(common, image_path, query, out_path, annotate_path);
        }
        if (eval->parsed()) return cmd_eval(common, dataset_path, parallel, report_path);
        if (trace->parsed()) return cmd_trace(result_path);
    } catch (const harness::SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const harness::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
