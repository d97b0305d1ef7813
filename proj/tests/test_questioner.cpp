#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "helpers.hpp"
#include "oracles.hpp"
#include "owdl/protocol.hpp"
#include "owdl/questioner.hpp"

using namespace owdl;

namespace {

// Multiset-comparable view of a sample set (origin-agnostic).
std::vector<std::pair<std::vector<float>, int>> xy_multiset(const KtSampleSet& set) {
    std::vector<std::pair<std::vector<float>, int>> out;
    for (const auto& s : set.samples) out.emplace_back(oracle::to_std(s.x.values), s.y);
    std::sort(out.begin(), out.end());
    return out;
}

QuestionerConfig base_cfg(Scheme scheme, int t, std::uint64_t seed = 7) {
    QuestionerConfig cfg;
    cfg.scheme = scheme;
    cfg.T = t;
    cfg.k = 3;
    cfg.R = 0;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("QuestionerConfig invariants") {
    QuestionerConfig cfg = base_cfg(Scheme::rr, 5);
    cfg.check(16);
    cfg.R = 6;  // R > T
    CHECK_THROWS_AS(cfg.check(16), std::invalid_argument);
    cfg = base_cfg(Scheme::rr, 5);
    cfg.k = 17;  // k > N
    CHECK_THROWS_AS(cfg.check(16), std::invalid_argument);
    cfg = base_cfg(Scheme::entropy, 5);
    cfg.T_prime = 3;  // positive but below T
    CHECK_THROWS_AS(cfg.check(16), std::invalid_argument);
    cfg = base_cfg(Scheme::rr, -1);
    CHECK_THROWS_AS(cfg.check(16), std::invalid_argument);
    cfg = base_cfg(Scheme::rr, 0);  // zero budget is a valid degenerate case
    cfg.check(16);

    cfg = base_cfg(Scheme::entropy, 5);
    CHECK(cfg.effective_t_prime(10) == 20L * 5 * 10);
    CHECK(cfg.effective_attempt_cap(10) == 200L * 5 * 10);
    cfg.T_prime = 77;
    cfg.attempt_cap = 0;
    CHECK(cfg.effective_t_prime(10) == 77);
    CHECK(cfg.effective_attempt_cap(10) == 0);
}

TEST_CASE("scheme names parse and print") {
    for (Scheme s : {Scheme::replay, Scheme::rr, Scheme::entropy, Scheme::mixup})
        CHECK(parse_scheme(scheme_name(s)) == s);
    CHECK_THROWS_AS(parse_scheme("bogus"), std::invalid_argument);
}

TEST_CASE("generate_rr_query matches the sort oracle on fixed noise") {
    // The query is the k-hot RRF of the drawn noise; with noise
    // [0.1, 0.9, 0.3, 0.7, 0.2] and k=2 that is [0, 1, 0, 0.5, 0].
    Vec noise(5);
    noise << 0.1f, 0.9f, 0.3f, 0.7f, 0.2f;
    auto q = khot_truncate(scores_to_rrf(noise), 2);
    CHECK(oracle::to_std(q.values) == std::vector<float>{0.0f, 1.0f, 0.0f, 0.5f, 0.0f});
}

TEST_CASE("generate_rr_query determinism and shape") {
    SplitMix64 a(9), b(9);
    auto q1 = generate_rr_query(16, 3, a);
    auto q2 = generate_rr_query(16, 3, b);
    CHECK(q1.values == q2.values);
    CHECK(q1.nonzeros() == 3);

    SplitMix64 c(10);
    auto full = generate_rr_query(6, 6, c);  // k = N: a permutation of {1..1/N}
    std::vector<float> vals = oracle::to_std(full.values);
    std::sort(vals.rbegin(), vals.rend());
    for (int i = 0; i < 6; ++i) CHECK(vals[i] == doctest::Approx(1.0 / (i + 1)));

    CHECK_THROWS_AS(generate_rr_query(4, 5, c), std::invalid_argument);
}

TEST_CASE("entropy closed forms and oracle agreement") {
    ProbabilityMap one_hot{Vec::Zero(5)};
    one_hot.values(2) = 1.0f;
    CHECK(entropy(one_hot) == doctest::Approx(0.0));

    ProbabilityMap uniform{Vec::Constant(100, 0.01f)};
    CHECK(entropy(uniform) == doctest::Approx(std::log(100.0)).epsilon(1e-4));

    ProbabilityMap half{Vec::Constant(2, 0.5f)};
    CHECK(entropy(half) == doctest::Approx(std::log(2.0)));

    ProbabilityMap bad{Vec::Constant(3, 0.5f)};  // sums to 1.5
    CHECK_THROWS_AS(entropy(bad), std::invalid_argument);

    SplitMix64 rng(21);
    for (int trial = 0; trial < 1000; ++trial) {
        const int c = 2 + static_cast<int>(rng.next_below(9));
        Vec raw(c);
        for (int i = 0; i < c; ++i) raw(i) = static_cast<float>(rng.next_uniform(0.01, 1.0));
        ProbabilityMap p{Vec(raw / raw.sum())};
        std::vector<double> pd;
        for (int i = 0; i < c; ++i) pd.push_back(p.values(i));
        CHECK(std::abs(entropy(p) - oracle::entropy(pd)) < 1e-10);
    }
}

TEST_CASE("rr scheme honors budgets and labels from the teacher") {
    const auto& teacher = fixtures::small_teacher();
    auto cfg = base_cfg(Scheme::rr, 3);
    auto [set, attempts] = run_rr_scheme(teacher, cfg);
    CHECK(attempts <= cfg.effective_attempt_cap(10));
    CHECK(set.total() <= 3 * 10);
    for (const auto& s : set.samples) {
        CHECK(teacher.in_charge(s.y));
        CHECK(s.origin == Origin::rr);
        CHECK(s.soft_label.has_value());  // full-capability teacher
        CHECK(answer_query(teacher, s.x).top1 == s.y);
    }
    for (auto& [cls, n] : set.per_class_counts) CHECK(n <= 3);
    // Full yield at the generous default cap for this well-trained teacher.
    CHECK(set.total() == 3 * 10);
    CHECK(set.shortfalls.empty());
}

TEST_CASE("rr scheme with zero attempt cap yields an empty set with shortfalls") {
    auto cfg = base_cfg(Scheme::rr, 3);
    cfg.attempt_cap = 0;
    auto [set, attempts] = run_rr_scheme(fixtures::small_teacher(), cfg);
    CHECK(attempts == 0);
    CHECK(set.total() == 0);
    CHECK(set.shortfalls.size() == 10);
    for (auto& [cls, deficit] : set.shortfalls) CHECK(deficit == 3);
}

TEST_CASE("rr scheme fails loudly when the cap is exhausted with nothing collected") {
    SelfLocalizationModel hopeless = fixtures::small_teacher();
    // Rig the teacher so its top-1 is always a class outside its charge.
    hopeless.net.b2.setConstant(-100.0f);
    hopeless.net.b2(15) = 100.0f;  // class 15 is not in charge {0..9}
    hopeless.net.w2.setZero();
    auto cfg = base_cfg(Scheme::rr, 1);
    cfg.attempt_cap = 50;
    CHECK_THROWS_AS(run_rr_scheme(hopeless, cfg), std::runtime_error);
}

TEST_CASE("entropy scheme requires the probability map") {
    SelfLocalizationModel blind = fixtures::small_teacher();
    blind.capabilities.gives_probability_map = false;
    CHECK_THROWS_WITH_AS(run_entropy_scheme(blind, base_cfg(Scheme::entropy, 2)),
                         "entropy scheme requires probability map", std::runtime_error);
}

TEST_CASE("entropy scheme selects the most confident probes per class") {
    const auto& teacher = fixtures::small_teacher();
    auto cfg = base_cfg(Scheme::entropy, 2);
    std::vector<ProbeLogEntry> log;
    auto [set, attempts] = run_entropy_scheme(teacher, cfg, &log);
    CHECK(attempts == cfg.effective_t_prime(10));
    CHECK(static_cast<long>(log.size()) == attempts);
    CHECK(set.total() <= 2 * 10);
    for (auto& [cls, n] : set.per_class_counts) CHECK(n <= 2);

    // Mean entropy of the selected set is at most the probe-set mean.
    double probe_mean = 0;
    for (const auto& e : log) probe_mean += e.entropy;
    probe_mean /= log.size();
    double sel_mean = 0;
    for (const auto& s : set.samples) sel_mean += entropy(*s.soft_label);
    sel_mean /= set.total();
    CHECK(sel_mean <= probe_mean);

    // Per full class, fewer than T probes can be strictly more confident
    // than the worst selected one (otherwise one would have displaced it).
    std::map<int, double> worst_selected;
    std::map<int, int> picked;
    for (const auto& s : set.samples) {
        const double e = entropy(*s.soft_label);
        auto it = worst_selected.find(s.y);
        worst_selected[s.y] = it == worst_selected.end() ? e : std::max(it->second, e);
        ++picked[s.y];
    }
    std::map<int, int> better;
    for (const auto& e : log)
        if (teacher.in_charge(e.top1) && picked[e.top1] == 2 &&
            e.entropy < worst_selected[e.top1])
            ++better[e.top1];
    for (auto& [cls, n] : better) CHECK(n <= 1);  // at most T - 1 = 1
}

TEST_CASE("entropy scheme with T' = T and no slack reduces to the rr scheme") {
    const auto& teacher = fixtures::small_teacher();
    const long q = 60;  // shared probe budget; no per-class cap binds
    auto ecfg = base_cfg(Scheme::entropy, static_cast<int>(q));
    ecfg.T_prime = q;
    auto rcfg = base_cfg(Scheme::rr, static_cast<int>(q));
    rcfg.attempt_cap = q;
    auto [eset, eq] = run_entropy_scheme(teacher, ecfg);
    auto [rset, rq] = run_rr_scheme(teacher, rcfg);
    CHECK(eq == rq);
    CHECK(xy_multiset(eset) == xy_multiset(rset));
}

TEST_CASE("replay scheme attaches soft labels when the teacher can give them") {
    const auto& teacher = fixtures::small_teacher();
    auto set = run_replay_scheme(teacher, base_cfg(Scheme::replay, 4));
    CHECK(set.total() == 4 * 10);
    for (const auto& s : set.samples) {
        CHECK(s.origin == Origin::replay);
        CHECK(s.soft_label.has_value());
        CHECK(s.soft_label->valid());
    }
    SelfLocalizationModel mute = teacher;
    mute.capabilities.gives_probability_map = false;
    auto plain = run_replay_scheme(mute, base_cfg(Scheme::replay, 4));
    for (const auto& s : plain.samples) CHECK_FALSE(s.soft_label.has_value());
}

TEST_CASE("mixup degenerates to replay at R = T and to the base scheme at R = 0") {
    const auto& teacher = fixtures::small_teacher();
    auto cfg = base_cfg(Scheme::mixup, 3);
    cfg.R = 3;
    auto [as_replay, a_att] = run_mixup_scheme(teacher, cfg);
    CHECK(a_att == 0);
    auto replay = run_replay_scheme(teacher, base_cfg(Scheme::replay, 3));
    CHECK(xy_multiset(as_replay) == xy_multiset(replay));
    for (const auto& s : as_replay.samples) CHECK(s.origin == Origin::replay);

    cfg.R = 0;
    cfg.mixup_base = Scheme::entropy;
    auto [as_base, b_att] = run_mixup_scheme(teacher, cfg);
    auto [entropy_set, e_att] = run_entropy_scheme(teacher, base_cfg(Scheme::entropy, 3));
    CHECK(b_att == e_att);
    CHECK(xy_multiset(as_base) == xy_multiset(entropy_set));
    for (const auto& s : as_base.samples) CHECK(s.origin == Origin::entropy);
}

TEST_CASE("mixup mixes exactly R replay samples per class") {
    const auto& teacher = fixtures::small_teacher();
    auto cfg = base_cfg(Scheme::mixup, 5);
    cfg.R = 1;
    auto [set, attempts] = run_mixup_scheme(teacher, cfg);
    (void)attempts;
    std::map<int, int> replay_count, total_count;
    for (const auto& s : set.samples) {
        ++total_count[s.y];
        if (s.origin == Origin::replay) ++replay_count[s.y];
    }
    for (int cls : teacher.classes_in_charge) {
        CHECK(replay_count[cls] == 1);
        CHECK(total_count[cls] <= 5);
        CHECK(total_count[cls] - replay_count[cls] <= 4);
    }
}

TEST_CASE("mixup refuses a teacher without replay capability") {
    SelfLocalizationModel m = fixtures::small_teacher();
    m.capabilities.gives_replay_samples = false;
    auto cfg = base_cfg(Scheme::mixup, 3);
    cfg.R = 1;
    CHECK_THROWS_WITH_AS(run_mixup_scheme(m, cfg),
                         "mixup scheme refused: missing capability gives_replay_samples",
                         std::runtime_error);
}

TEST_CASE("all schemes are deterministic under a fixed seed") {
    const auto& teacher = fixtures::small_teacher();
    for (Scheme scheme : {Scheme::replay, Scheme::rr, Scheme::entropy, Scheme::mixup}) {
        auto cfg = base_cfg(scheme, 3, 33);
        cfg.R = scheme == Scheme::mixup ? 1 : 0;
        auto a = execute_kt(cfg, teacher);
        auto b = execute_kt(cfg, teacher);
        CHECK(a.billed_cost == b.billed_cost);
        CHECK(a.questions_asked == b.questions_asked);
        REQUIRE(a.samples.total() == b.samples.total());
        for (int i = 0; i < a.samples.total(); ++i) {
            CHECK(a.samples.samples[i].x.values == b.samples.samples[i].x.values);
            CHECK(a.samples.samples[i].y == b.samples.samples[i].y);
        }
    }
}
