#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "owdl/models.hpp"
#include "owdl/rng.hpp"
#include "owdl/types.hpp"
#include "owdl/worldgen.hpp"

namespace owdl {

enum class Scheme { replay, rr, entropy, mixup };

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::replay: return "replay";
        case Scheme::rr: return "rr";
        case Scheme::entropy: return "entropy";
        case Scheme::mixup: return "mixup";
    }
    return "?";
}

inline Scheme parse_scheme(const std::string& s) {
    if (s == "replay") return Scheme::replay;
    if (s == "rr") return Scheme::rr;
    if (s == "entropy") return Scheme::entropy;
    if (s == "mixup") return Scheme::mixup;
    throw std::invalid_argument("unknown scheme: " + s);
}

struct QuestionerConfig {
    Scheme scheme = Scheme::entropy;
    int T = 5;              // selected (billed) samples per class
    int T_prime = -1;       // entropy probe budget; -1 = 20 * T * |classes|
    int k = 10;             // k-hot query sparsity
    int R = 1;              // replay samples per class inside mixup
    Scheme mixup_base = Scheme::entropy;
    long attempt_cap = -1;  // rr rejection-sampling cap; -1 = 200 * T * |classes|
    std::uint64_t seed = 0;

    void check(int embedding_dim) const {
        if (T < 0) throw std::invalid_argument("T must be non-negative");
        if (T_prime != -1 && T_prime < T) throw std::invalid_argument("T_prime must be >= T");
        if (k < 1 || (embedding_dim > 0 && k > embedding_dim))
            throw std::invalid_argument("k must be in [1, N]");
        if (R < 0 || R > T) throw std::invalid_argument("R must be in [0, T]");
        if (attempt_cap < -1) throw std::invalid_argument("attempt_cap must be >= 0 or -1 (auto)");
        if (mixup_base != Scheme::rr && mixup_base != Scheme::entropy)
            throw std::invalid_argument("mixup_base must be rr or entropy");
    }

    long effective_t_prime(int num_classes) const {
        return T_prime >= 0 ? T_prime : 20L * T * num_classes;
    }
    long effective_attempt_cap(int num_classes) const {
        return attempt_cap >= 0 ? attempt_cap : 200L * T * num_classes;
    }
};

// Samples collected from one teacher, with per-class bookkeeping.
struct KtSampleSet {
    std::vector<Sample> samples;
    std::map<int, int> per_class_counts;
    std::map<int, int> shortfalls;  // class -> deficit vs. the requested budget

    int total() const { return static_cast<int>(samples.size()); }
};

// One question-and-answer step, for transcript audits.
struct ProbeLogEntry {
    long t = 0;
    std::vector<int> query_indices;  // nonzero positions of the k-hot query
    int top1 = 0;
    double entropy = -1.0;  // -1 when the teacher gives no probability map
};

// Random k-hot RRF query: reciprocal ranks of the k largest of N iid
// uniform noise values.
inline RrfVector generate_rr_query(int n, int k, SplitMix64& rng) {
    if (k < 1 || k > n) throw std::invalid_argument("generate_rr_query: k out of range");
    Vec noise(n);
    for (int i = 0; i < n; ++i) noise(i) = static_cast<float>(rng.next_uniform());
    return khot_truncate(scores_to_rrf(noise), k);
}

// Shannon entropy of a probability map, natural log, 0*log0 = 0.
inline double entropy(const ProbabilityMap& p) {
    if (!p.valid()) throw std::invalid_argument("entropy: invalid probability map");
    double e = 0;
    for (int i = 0; i < p.values.size(); ++i) {
        const double v = p.values(i);
        if (v > 0) e -= v * std::log(v);
    }
    return e;
}

namespace detail {

inline std::vector<int> nonzero_indices(const RrfVector& v) {
    std::vector<int> idx;
    for (int i = 0; i < v.dim(); ++i)
        if (v.values(i) != 0.0f) idx.push_back(i);
    return idx;
}

inline void record_shortfalls(KtSampleSet& set, const std::vector<int>& classes, int budget) {
    for (int cls : classes) {
        const int have = set.per_class_counts.count(cls) ? set.per_class_counts[cls] : 0;
        if (have < budget) set.shortfalls[cls] = budget - have;
    }
}

}  // namespace detail

// Rejection sampling in RRF space: random queries labeled by the teacher's
// top-1 answer, bucketed per class-in-charge until each has T samples or
// the attempt cap runs out.
inline std::pair<KtSampleSet, long> run_rr_scheme(const SelfLocalizationModel& teacher,
                                                  const QuestionerConfig& cfg,
                                                  std::vector<ProbeLogEntry>* log = nullptr) {
    const int n = teacher.net.input_dim();
    cfg.check(n);
    const auto& classes = teacher.classes_in_charge;
    const long cap = cfg.effective_attempt_cap(static_cast<int>(classes.size()));

    KtSampleSet set;
    for (int cls : classes) set.per_class_counts[cls] = 0;
    SplitMix64 rng(mix_seed(cfg.seed, 0x71756572ull));
    long attempts = 0;
    int full = 0;
    while (attempts < cap && full < static_cast<int>(classes.size())) {
        RrfVector q = generate_rr_query(n, cfg.k, rng);
        Answer a = answer_query(teacher, q);
        ++attempts;
        if (log)
            log->push_back({attempts, detail::nonzero_indices(q), a.top1,
                            a.prob_map ? entropy(*a.prob_map) : -1.0});
        auto it = set.per_class_counts.find(a.top1);
        if (it == set.per_class_counts.end() || it->second >= cfg.T) continue;
        Sample s;
        s.x = std::move(q);
        s.y = a.top1;
        s.origin = Origin::rr;
        if (a.prob_map) s.soft_label = std::move(a.prob_map);
        set.samples.push_back(std::move(s));
        if (++it->second == cfg.T) ++full;
    }
    detail::record_shortfalls(set, classes, cfg.T);
    if (cap > 0 && set.samples.empty())
        throw std::runtime_error("rr scheme failed: no samples within attempt cap");
    return {std::move(set), attempts};
}

// Probe with T' random RR queries, keep the lowest-entropy (most confident)
// answers, at most T per class. The per-class cap is the undersampling that
// keeps popular classes from flooding the transfer set.
inline std::pair<KtSampleSet, long> run_entropy_scheme(const SelfLocalizationModel& teacher,
                                                       const QuestionerConfig& cfg,
                                                       std::vector<ProbeLogEntry>* log = nullptr) {
    const int n = teacher.net.input_dim();
    cfg.check(n);
    if (!teacher.capabilities.gives_probability_map)
        throw std::runtime_error("entropy scheme requires probability map");
    const auto& classes = teacher.classes_in_charge;
    const long t_prime = cfg.effective_t_prime(static_cast<int>(classes.size()));

    struct Probe {
        double ent;
        Sample sample;
    };
    std::map<int, std::vector<Probe>> by_class;
    for (int cls : classes) by_class[cls];

    // Same query stream as the rr scheme: with T' = T and no selection slack
    // the entropy scheme reduces to it exactly.
    SplitMix64 rng(mix_seed(cfg.seed, 0x71756572ull));
    for (long t = 0; t < t_prime; ++t) {
        RrfVector q = generate_rr_query(n, cfg.k, rng);
        Answer a = answer_query(teacher, q);
        const double e = entropy(*a.prob_map);
        if (log) log->push_back({t + 1, detail::nonzero_indices(q), a.top1, e});
        auto it = by_class.find(a.top1);
        if (it == by_class.end()) continue;
        Sample s;
        s.x = std::move(q);
        s.y = a.top1;
        s.origin = Origin::entropy;
        s.soft_label = std::move(a.prob_map);
        it->second.push_back({e, std::move(s)});
    }

    KtSampleSet set;
    for (int cls : classes) {
        auto& probes = by_class[cls];
        std::stable_sort(probes.begin(), probes.end(),
                         [](const Probe& a, const Probe& b) { return a.ent < b.ent; });
        const int take = std::min<int>(cfg.T, static_cast<int>(probes.size()));
        for (int i = 0; i < take; ++i) set.samples.push_back(std::move(probes[i].sample));
        set.per_class_counts[cls] = take;
    }
    detail::record_shortfalls(set, classes, cfg.T);
    return {std::move(set), t_prime};
}

// Non-data-free baseline: hand over retained training samples, with teacher
// soft labels attached when the teacher exposes its probability map.
inline KtSampleSet run_replay_scheme(const SelfLocalizationModel& teacher,
                                     const QuestionerConfig& cfg) {
    cfg.check(teacher.net.input_dim());
    std::vector<Sample> harvested = harvest_replay(teacher, cfg.T);
    KtSampleSet set;
    for (int cls : teacher.classes_in_charge) set.per_class_counts[cls] = 0;
    for (Sample& s : harvested) {
        if (teacher.capabilities.gives_probability_map)
            s.soft_label = answer_query(teacher, s.x).prob_map;
        ++set.per_class_counts[s.y];
        set.samples.push_back(std::move(s));
    }
    detail::record_shortfalls(set, teacher.classes_in_charge, cfg.T);
    return set;
}

// Per class: R replay samples plus up to T-R samples from the base scheme.
inline std::pair<KtSampleSet, long> run_mixup_scheme(const SelfLocalizationModel& teacher,
                                                     const QuestionerConfig& cfg,
                                                     std::vector<ProbeLogEntry>* log = nullptr) {
    cfg.check(teacher.net.input_dim());
    if (cfg.R > 0 && !teacher.capabilities.gives_replay_samples)
        throw std::runtime_error("mixup scheme refused: missing capability gives_replay_samples");

    KtSampleSet set;
    long attempts = 0;
    for (int cls : teacher.classes_in_charge) set.per_class_counts[cls] = 0;

    if (cfg.R > 0) {
        QuestionerConfig replay_cfg = cfg;
        replay_cfg.T = cfg.R;
        KtSampleSet rep = run_replay_scheme(teacher, replay_cfg);
        for (Sample& s : rep.samples) {
            ++set.per_class_counts[s.y];
            set.samples.push_back(std::move(s));
        }
    }

    if (cfg.T - cfg.R > 0) {
        QuestionerConfig base_cfg = cfg;
        base_cfg.scheme = cfg.mixup_base;
        base_cfg.T = cfg.T - cfg.R;
        base_cfg.T_prime = -1;
        base_cfg.attempt_cap = -1;
        // R = 0 degenerates to the plain base scheme, including its seed stream.
        base_cfg.seed = cfg.R == 0 ? cfg.seed : mix_seed(cfg.seed, 0x6d697862ull);
        std::pair<KtSampleSet, long> base =
            cfg.mixup_base == Scheme::entropy ? run_entropy_scheme(teacher, base_cfg, log)
                                              : run_rr_scheme(teacher, base_cfg, log);
        attempts = base.second;
        for (Sample& s : base.first.samples) {
            if (set.per_class_counts[s.y] >= cfg.T) continue;
            ++set.per_class_counts[s.y];
            set.samples.push_back(std::move(s));
        }
    }

    detail::record_shortfalls(set, teacher.classes_in_charge, cfg.T);
    return {std::move(set), attempts};
}

}  // namespace owdl
