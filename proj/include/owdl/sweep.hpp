#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "owdl/config.hpp"
#include "owdl/scenario.hpp"

namespace owdl {

struct CellResult {
    int s = 0;
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::rr;
    int t = 0;
    std::vector<StageMetrics> stages;
    std::vector<KtTranscript> transcripts;
    bool ok = false;
    std::string error;
};

struct SweepResult {
    std::vector<CellResult> cells;  // fixed (s, seed, scheme, T) order
    bool all_ok = true;
    std::string metrics_csv;
    std::string summary_text;
};

namespace detail {

inline std::string fmt_acc(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace detail

inline std::string metrics_csv_header(int num_teachers) {
    std::string h = "seed,s,scheme,T,stage,top1,cumulative_cost";
    for (int i = 0; i <= num_teachers; ++i) h += ",origin" + std::to_string(i) + "_acc";
    return h + "\n";
}

inline void append_metrics_rows(std::string& csv, const CellResult& cell, int num_teachers) {
    for (const StageMetrics& m : cell.stages) {
        csv += std::to_string(cell.seed) + "," + std::to_string(cell.s) + "," +
               scheme_name(cell.scheme) + "," + std::to_string(cell.t) + "," +
               std::to_string(m.stage) + "," + detail::fmt_acc(m.top1_accuracy) + "," +
               std::to_string(m.cumulative_cost);
        for (int i = 0; i <= num_teachers; ++i) {
            auto it = m.per_origin_accuracy.find(i);
            csv += ",";
            csv += it == m.per_origin_accuracy.end() ? "" : detail::fmt_acc(it->second);
        }
        csv += "\n";
    }
}

// Runs every (s, seed, scheme, T) cell. Agents and test sets are built once
// per (s, seed) and shared across schemes and T so comparisons are paired.
// Cell failures are recorded and the remaining cells still run.
inline SweepResult run_sweep(const ScenarioConfig& scenario_template, const SweepSpec& spec,
                             int jobs = 1, bool keep_logs = false) {
    struct Group {
        int s;
        std::uint64_t seed;
        std::size_t first_cell;
    };
    SweepResult result;
    std::vector<Group> groups;
    for (int s : spec.s_values)
        for (std::uint64_t seed : spec.seeds) {
            groups.push_back({s, seed, result.cells.size()});
            for (Scheme scheme : spec.schemes)
                for (int t : spec.t_values) {
                    CellResult c;
                    c.s = s;
                    c.seed = seed;
                    c.scheme = scheme;
                    c.t = t;
                    result.cells.push_back(std::move(c));
                }
        }

    auto run_group = [&](const Group& g) {
        ScenarioConfig cfg = scenario_template;
        cfg.student_session = g.s;
        std::size_t idx = g.first_cell;
        std::optional<ScenarioBase> base;
        std::string base_error;
        try {
            base.emplace(prepare_base(cfg, g.seed));
        } catch (const std::exception& e) {
            base_error = e.what();
        }
        for (Scheme scheme : spec.schemes)
            for (int t : spec.t_values) {
                CellResult& cell = result.cells[idx++];
                if (!base) {
                    cell.ok = false;
                    cell.error = base_error;
                    continue;
                }
                try {
                    ScenarioConfig cell_cfg = cfg;
                    cell_cfg.questioner.scheme = scheme;
                    cell_cfg.questioner.T = t;
                    ScenarioResult r = run_scenario_from_base(cell_cfg, *base, keep_logs);
                    cell.stages = std::move(r.stages);
                    cell.transcripts = std::move(r.transcripts);
                    cell.ok = true;
                } catch (const std::exception& e) {
                    cell.ok = false;
                    cell.error = e.what();
                }
            }
    };

    if (jobs <= 1 || groups.size() <= 1) {
        for (const Group& g : groups) run_group(g);
    } else {
        std::mutex mu;
        std::size_t next = 0;
        auto worker = [&]() {
            for (;;) {
                std::size_t i;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (next >= groups.size()) return;
                    i = next++;
                }
                run_group(groups[i]);
            }
        };
        std::vector<std::thread> pool;
        const int n = std::min<int>(jobs, static_cast<int>(groups.size()));
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    result.metrics_csv = metrics_csv_header(scenario_template.num_teachers);
    for (const CellResult& cell : result.cells) {
        if (!cell.ok) {
            result.all_ok = false;
            continue;
        }
        append_metrics_rows(result.metrics_csv, cell, scenario_template.num_teachers);
    }

    // Summary: mean +/- std of final-stage top-1 per (scheme, T).
    std::map<std::pair<int, int>, std::vector<double>> finals;  // (scheme, T) -> values
    for (const CellResult& cell : result.cells)
        if (cell.ok && !cell.stages.empty())
            finals[{static_cast<int>(cell.scheme), cell.t}].push_back(
                cell.stages.back().top1_accuracy);
    std::string summary = "scheme,T,final_top1_mean,final_top1_std,n\n";
    for (Scheme scheme : spec.schemes)
        for (int t : spec.t_values) {
            auto it = finals.find({static_cast<int>(scheme), t});
            if (it == finals.end()) continue;
            const auto& v = it->second;
            double mean = 0;
            for (double x : v) mean += x;
            mean /= v.size();
            double var = 0;
            for (double x : v) var += (x - mean) * (x - mean);
            const double stddev = v.size() > 1 ? std::sqrt(var / (v.size() - 1)) : 0.0;
            summary += std::string(scheme_name(scheme)) + "," + std::to_string(t) + "," +
                       detail::fmt_acc(mean) + "," + detail::fmt_acc(stddev) + "," +
                       std::to_string(v.size()) + "\n";
        }
    result.summary_text = std::move(summary);
    return result;
}

// Writes metrics.csv, summary.csv, per-cell failure list, and optionally
// per-cell transcript JSON files into output_dir.
inline void write_sweep_outputs(const SweepResult& result, const std::string& output_dir,
                                bool dump_transcripts) {
    namespace fs = std::filesystem;
    fs::create_directories(output_dir);
    std::ofstream(output_dir + "/metrics.csv") << result.metrics_csv;
    std::ofstream(output_dir + "/summary.csv") << result.summary_text;

    std::ofstream failures(output_dir + "/failures.csv");
    failures << "seed,s,scheme,T,error\n";
    for (const CellResult& cell : result.cells)
        if (!cell.ok)
            failures << cell.seed << "," << cell.s << "," << scheme_name(cell.scheme) << ","
                     << cell.t << ",\"" << cell.error << "\"\n";

    if (dump_transcripts) {
        fs::create_directories(output_dir + "/transcripts");
        for (const CellResult& cell : result.cells) {
            if (!cell.ok) continue;
            nlohmann::json arr = nlohmann::json::array();
            for (const KtTranscript& tr : cell.transcripts) arr.push_back(transcript_to_json(tr));
            std::string name = output_dir + "/transcripts/s" + std::to_string(cell.s) + "_seed" +
                               std::to_string(cell.seed) + "_" + scheme_name(cell.scheme) + "_T" +
                               std::to_string(cell.t) + ".json";
            std::ofstream(name) << arr.dump(2) << "\n";
        }
    }
}

}  // namespace owdl
