#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "owdl/models.hpp"
#include "owdl/questioner.hpp"

namespace owdl {

// Record of one questioner-teacher interaction. Only the sample-return
// phase is billed; the question phase runs teacher-side and costs nothing.
struct KtTranscript {
    int teacher_id = -1;
    Scheme scheme = Scheme::rr;
    long questions_asked = 0;
    KtSampleSet samples;
    long billed_cost = 0;
    std::optional<std::vector<ProbeLogEntry>> log;
};

// Full message sequence against one teacher: dispatch the questioner, run
// the interaction, return the selected samples, bill one unit per returned
// sample.
inline KtTranscript execute_kt(const QuestionerConfig& cfg, const SelfLocalizationModel& teacher,
                               int teacher_id = -1, bool keep_log = false) {
    KtTranscript tr;
    tr.teacher_id = teacher_id;
    tr.scheme = cfg.scheme;
    std::vector<ProbeLogEntry> log;
    std::vector<ProbeLogEntry>* logp = keep_log ? &log : nullptr;

    switch (cfg.scheme) {
        case Scheme::replay:
            tr.samples = run_replay_scheme(teacher, cfg);
            tr.questions_asked = 0;
            break;
        case Scheme::rr: {
            auto [set, attempts] = run_rr_scheme(teacher, cfg, logp);
            tr.samples = std::move(set);
            tr.questions_asked = attempts;
            break;
        }
        case Scheme::entropy: {
            auto [set, attempts] = run_entropy_scheme(teacher, cfg, logp);
            tr.samples = std::move(set);
            tr.questions_asked = attempts;
            break;
        }
        case Scheme::mixup: {
            auto [set, attempts] = run_mixup_scheme(teacher, cfg, logp);
            tr.samples = std::move(set);
            tr.questions_asked = attempts;
            break;
        }
    }
    tr.billed_cost = tr.samples.total();
    if (keep_log) tr.log = std::move(log);
    return tr;
}

// Cost-free sample generation from the student's own previous model: for
// each requested class, RR queries against the previous student are kept
// when its top-1 answer hits that class, up to per_class samples each.
inline KtSampleSet student_self_kt(const SelfLocalizationModel& prev_student,
                                   const std::set<int>& classes, int per_class,
                                   std::uint64_t seed, int k = 10,
                                   long attempt_cap = 0) {
    KtSampleSet set;
    if (classes.empty()) return set;
    const int n = prev_student.net.input_dim();
    if (attempt_cap <= 0)
        attempt_cap = 200L * per_class * static_cast<long>(classes.size());

    for (int cls : classes) set.per_class_counts[cls] = 0;
    SplitMix64 rng(mix_seed(seed, 0x73656c66ull));
    long attempts = 0;
    int full = 0;
    while (attempts < attempt_cap && full < static_cast<int>(classes.size())) {
        RrfVector q = generate_rr_query(n, k, rng);
        Answer a = answer_query(prev_student, q);
        ++attempts;
        auto it = set.per_class_counts.find(a.top1);
        if (it == set.per_class_counts.end() || it->second >= per_class) continue;
        Sample s;
        s.x = std::move(q);
        s.y = a.top1;
        s.origin = Origin::self_kt;
        if (a.prob_map) s.soft_label = std::move(a.prob_map);
        set.samples.push_back(std::move(s));
        if (++it->second == per_class) ++full;
    }
    std::vector<int> cls_vec(classes.begin(), classes.end());
    detail::record_shortfalls(set, cls_vec, per_class);
    return set;
}

inline nlohmann::json transcript_to_json(const KtTranscript& tr) {
    nlohmann::json j;
    j["teacher_id"] = tr.teacher_id;
    j["scheme"] = scheme_name(tr.scheme);
    j["questions_asked"] = tr.questions_asked;
    j["billed_cost"] = tr.billed_cost;
    nlohmann::json counts = nlohmann::json::object();
    for (auto& [cls, n] : tr.samples.per_class_counts) counts[std::to_string(cls)] = n;
    j["per_class_counts"] = counts;
    nlohmann::json shorts = nlohmann::json::object();
    for (auto& [cls, n] : tr.samples.shortfalls) shorts[std::to_string(cls)] = n;
    j["shortfalls"] = shorts;
    if (tr.log) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& e : *tr.log)
            rows.push_back({{"t", e.t},
                            {"query", e.query_indices},
                            {"top1", e.top1},
                            {"entropy", e.entropy}});
        j["log"] = rows;
    }
    return j;
}

// Audit CSV of the question-and-answer history.
inline std::string transcript_log_csv(const std::vector<ProbeLogEntry>& log) {
    std::string out = "t,query_indices,top1,entropy\n";
    for (const auto& e : log) {
        out += std::to_string(e.t) + ",\"";
        for (std::size_t i = 0; i < e.query_indices.size(); ++i) {
            if (i) out += ' ';
            out += std::to_string(e.query_indices[i]);
        }
        out += "\"," + std::to_string(e.top1) + ",";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", e.entropy);
        out += buf;
        out += '\n';
    }
    return out;
}

}  // namespace owdl
