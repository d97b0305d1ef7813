#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "owdl/config.hpp"
#include "owdl/sweep.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

int cmd_validate(const std::string& config_path) {
    nlohmann::json tree;
    try {
        tree = owdl::load_config_tree(config_path);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    }
    auto diags = owdl::validate_config(tree);
    if (diags.empty()) {
        std::cout << "config ok: " << config_path << "\n";
        return kExitOk;
    }
    for (const auto& d : diags) std::cout << d << "\n";
    return kExitConfigError;
}

int cmd_run(const std::string& config_path, int jobs, const std::string& profile_override,
            bool dump_transcripts) {
    owdl::AppConfig cfg;
    try {
        cfg = owdl::load_config(config_path);
        if (!profile_override.empty()) {
            cfg.sweep.profile = owdl::parse_profile(profile_override);
            owdl::apply_profile(cfg);
        }
        if (const char* env = std::getenv("OWDL_SEED_OVERRIDE")) {
            cfg.sweep.seeds = {std::stoull(env)};
        }
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    }

    try {
        owdl::SweepResult result = owdl::run_sweep(cfg.scenario, cfg.sweep, jobs, dump_transcripts);
        owdl::write_sweep_outputs(result, cfg.sweep.output_dir, dump_transcripts);
        std::cout << result.summary_text;
        if (!result.all_ok) {
            int failed = 0;
            for (const auto& c : result.cells) failed += !c.ok;
            std::cerr << failed << " cell(s) failed; see " << cfg.sweep.output_dir
                      << "/failures.csv\n";
            return kExitRuntimeError;
        }
        std::cout << "wrote " << cfg.sweep.output_dir << "/metrics.csv\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kExitRuntimeError;
    }
}

// Recomputes the per-(scheme, T) summary from a metrics CSV.
int cmd_summarize(const std::string& input_path) {
    std::ifstream in(input_path);
    if (!in) {
        std::cerr << "cannot open " << input_path << "\n";
        return kExitRuntimeError;
    }
    std::string line;
    if (!std::getline(in, line)) {
        std::cerr << "empty metrics file\n";
        return kExitRuntimeError;
    }
    struct Key {
        std::string scheme;
        int t;
        std::string cell;  // seed+s identifies one run
        bool operator<(const Key& o) const {
            return std::tie(scheme, t, cell) < std::tie(o.scheme, o.t, o.cell);
        }
    };
    std::map<Key, std::pair<int, double>> last_stage;  // -> (stage, top1)
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string seed, s, scheme, t, stage, top1;
        if (!std::getline(ss, seed, ',') || !std::getline(ss, s, ',') ||
            !std::getline(ss, scheme, ',') || !std::getline(ss, t, ',') ||
            !std::getline(ss, stage, ',') || !std::getline(ss, top1, ',')) {
            std::cerr << "malformed row: " << line << "\n";
            return kExitRuntimeError;
        }
        Key key{scheme, std::stoi(t), seed + "/" + s};
        auto& slot = last_stage[key];
        const int st = std::stoi(stage);
        if (st >= slot.first) slot = {st, std::stod(top1)};
    }
    std::map<std::pair<std::string, int>, std::vector<double>> groups;
    for (auto& [key, v] : last_stage) groups[{key.scheme, key.t}].push_back(v.second);
    std::cout << "scheme,T,final_top1_mean,final_top1_std,n\n";
    for (auto& [key, vals] : groups) {
        double mean = 0;
        for (double x : vals) mean += x;
        mean /= vals.size();
        double var = 0;
        for (double x : vals) var += (x - mean) * (x - mean);
        double stddev = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1)) : 0.0;
        printf("%s,%d,%.6f,%.6f,%zu\n", key.first.c_str(), key.second, mean, stddev, vals.size());
    }
    return kExitOk;
}

// CSV dump of one generated session for inspection: one row per sample with
// the k nonzero RRF entries as index:value pairs.
int cmd_dump_world(const std::string& config_path, int session, int per_class,
                   const std::string& output) {
    owdl::AppConfig cfg;
    try {
        cfg = owdl::load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    }
    try {
        owdl::World world(cfg.scenario.world);
        auto samples = world.generate_session_samples(session, per_class);
        std::ostream* out = &std::cout;
        std::ofstream file;
        if (!output.empty()) {
            file.open(output);
            if (!file) throw std::runtime_error("cannot open output file: " + output);
            out = &file;
        }
        *out << "session_id,class,rrf\n";
        for (const auto& s : samples) {
            *out << session << "," << s.y << ",\"";
            bool first = true;
            for (int i = 0; i < s.x.dim(); ++i) {
                if (s.x.values(i) == 0.0f) continue;
                if (!first) *out << " ";
                char buf[48];
                std::snprintf(buf, sizeof(buf), "%d:%.6f", i, s.x.values(i));
                *out << buf;
                first = false;
            }
            *out << "\"\n";
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kExitRuntimeError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-world distributed localization knowledge-transfer simulator"};
    app.require_subcommand(1);

    std::string config_path, profile, input_path, output_path;
    int jobs = 1, session = 0, per_class = 10;
    bool dump_transcripts = false;

    auto* run = app.add_subcommand("run", "Run the configured experiment sweep");
    run->add_option("--config", config_path, "Config file (key-value or .json)")->required();
    run->add_option("--jobs", jobs, "Parallel (s, seed) groups");
    run->add_option("--profile", profile, "Override profile: desk or paper");
    run->add_flag("--dump-transcripts", dump_transcripts, "Write per-cell KT transcript JSON");

    auto* validate = app.add_subcommand("validate", "Check a config file against all invariants");
    validate->add_option("--config", config_path, "Config file")->required();

    auto* summarize = app.add_subcommand("summarize", "Summarize a metrics CSV");
    summarize->add_option("--input", input_path, "metrics.csv produced by run")->required();

    auto* dump = app.add_subcommand("dump-world", "Dump generated session samples as CSV");
    dump->add_option("--config", config_path, "Config file")->required();
    dump->add_option("--session", session, "Session id");
    dump->add_option("--per-class", per_class, "Samples per class");
    dump->add_option("--output", output_path, "Output CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? kExitConfigError : kExitOk;
    }

    if (run->parsed()) return cmd_run(config_path, jobs, profile, dump_transcripts);
    if (validate->parsed()) return cmd_validate(config_path);
    if (summarize->parsed()) return cmd_summarize(input_path);
    if (dump->parsed()) return cmd_dump_world(config_path, session, per_class, output_path);
    return kExitConfigError;
}
