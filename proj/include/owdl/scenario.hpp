#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "owdl/models.hpp"
#include "owdl/neuralnet.hpp"
#include "owdl/protocol.hpp"
#include "owdl/questioner.hpp"
#include "owdl/worldgen.hpp"

namespace owdl {

struct ScenarioConfig {
    WorldConfig world;
    int student_session = 0;  // s in [0, 6)
    int num_teachers = 3;
    int classes_per_agent = 10;
    int supervised_per_class = 100;
    int self_kt_per_class = 100;  // cost-free student-to-student budget
    int hidden_dim = 256;
    QuestionerConfig questioner;
    TrainConfig train;

    void check() const {
        world.check();
        if (student_session < 0 || student_session >= 6)
            throw std::invalid_argument("student_session must be in [0, 6)");
        if (num_teachers < 1) throw std::invalid_argument("num_teachers must be >= 1");
        if (classes_per_agent < 1 || classes_per_agent > world.num_classes())
            throw std::invalid_argument("classes_per_agent must be in [1, C]");
        if (supervised_per_class < 1)
            throw std::invalid_argument("supervised_per_class must be >= 1");
        if (self_kt_per_class < 1)
            throw std::invalid_argument("self_kt_per_class must be >= 1");
        if (hidden_dim < 1) throw std::invalid_argument("hidden_dim must be >= 1");
        questioner.check(world.embedding_dim);
        train.check();
    }
};

struct StageMetrics {
    int stage = 0;
    double top1_accuracy = 0;
    std::map<int, double> per_origin_accuracy;  // acquisition stage -> accuracy
    long cumulative_cost = 0;
    std::map<int, double> per_class_accuracy;
};

// Teacher i trains on session (6i+s) mod 25.
inline int teacher_session_id(int i, int s) {
    if (i < 1) throw std::invalid_argument("teacher index must be >= 1");
    if (s < 0 || s >= 6) throw std::invalid_argument("student session must be in [0, 6)");
    return (6 * i + s) % 25;
}

// Independent per-agent draws of classes_per_agent distinct classes;
// charges of different agents may overlap.
inline std::vector<std::vector<int>> assign_classes(SplitMix64& rng, int num_agents,
                                                    int classes_per_agent, int num_classes) {
    if (classes_per_agent > num_classes)
        throw std::invalid_argument("assign_classes: classes_per_agent > C");
    std::vector<std::vector<int>> charges;
    for (int a = 0; a < num_agents; ++a) {
        std::vector<int> all(num_classes);
        std::iota(all.begin(), all.end(), 0);
        for (int j = 0; j < classes_per_agent; ++j) {
            const int pick = j + static_cast<int>(rng.next_below(num_classes - j));
            std::swap(all[j], all[pick]);
        }
        std::vector<int> charge(all.begin(), all.begin() + classes_per_agent);
        std::sort(charge.begin(), charge.end());
        charges.push_back(std::move(charge));
    }
    return charges;
}

// Held-out test set: equal samples per union class from the reserved last
// session, which is never used for training.
inline std::vector<Sample> build_test_set(const World& world, const std::set<int>& union_classes,
                                          int per_class) {
    if (union_classes.empty()) throw std::invalid_argument("build_test_set: empty class union");
    const int test_session = world.config().num_sessions - 1;
    std::vector<Sample> out;
    for (int cls : union_classes) {
        auto cs = world.generate_class_samples(test_session, cls, per_class);
        out.insert(out.end(), cs.begin(), cs.end());
    }
    return out;
}

// Replicates minority-class samples (cycling in pool order) until every
// class matches the majority count. Originals are all retained.
inline std::vector<Sample> balance_by_oversampling(const std::vector<Sample>& pool) {
    if (pool.empty()) throw std::invalid_argument("balance_by_oversampling: empty pool");
    std::map<int, std::vector<int>> by_class;  // class -> indices into pool
    for (int i = 0; i < static_cast<int>(pool.size()); ++i) by_class[pool[i].y].push_back(i);
    std::size_t majority = 0;
    for (auto& [cls, idx] : by_class) majority = std::max(majority, idx.size());

    std::vector<Sample> out = pool;
    for (auto& [cls, idx] : by_class)
        for (std::size_t n = idx.size(); n < majority; ++n)
            out.push_back(pool[idx[n % idx.size()]]);
    return out;
}

inline double evaluate_top1(const DenseNetwork& net, const std::vector<Sample>& test_set) {
    if (test_set.empty()) return 0;
    Eigen::MatrixXf x(net.input_dim(), test_set.size());
    for (std::size_t j = 0; j < test_set.size(); ++j) x.col(j) = test_set[j].x.values;
    Eigen::MatrixXf logits = net.forward_batch(x);
    int correct = 0;
    for (std::size_t j = 0; j < test_set.size(); ++j)
        if (argmax_lowest(logits.col(j)) == test_set[j].y) ++correct;
    return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

// Accuracy broken down by the stage at which each test class was first
// learned (overlap classes belong to their earliest stage).
inline std::map<int, double> forgetting_report(const SelfLocalizationModel& model,
                                               const std::vector<Sample>& test_set,
                                               const std::map<int, int>& class_origin) {
    std::map<int, int> hits, totals;
    for (const Sample& s : test_set) {
        auto it = class_origin.find(s.y);
        if (it == class_origin.end())
            throw std::invalid_argument("forgetting_report: class without origin stage");
        ++totals[it->second];
        if (predict_class(model.net, s.x) == s.y) ++hits[it->second];
    }
    std::map<int, double> acc;
    for (auto& [stage, n] : totals) acc[stage] = static_cast<double>(hits[stage]) / n;
    return acc;
}

// World, trained agents, class assignment, and test set for one seed.
// Scheme- and T-independent, so paired scheme comparisons share it.
struct ScenarioBase {
    World world;
    std::vector<std::vector<int>> charges;  // [0] student, [1..] teachers
    SelfLocalizationModel student0;
    std::vector<SelfLocalizationModel> teachers;
    std::vector<Sample> test_set;
    std::map<int, int> class_origin;  // class -> earliest acquisition stage
    std::set<int> union_classes;
    std::uint64_t seed = 0;
};

namespace detail {

inline SelfLocalizationModel train_agent(const World& world, const std::vector<int>& charge,
                                         int session, const ScenarioConfig& cfg,
                                         std::uint64_t net_seed, std::uint64_t train_seed) {
    std::vector<Sample> data;
    for (int cls : charge) {
        auto cs = world.generate_class_samples(session, cls, cfg.supervised_per_class);
        data.insert(data.end(), cs.begin(), cs.end());
    }
    TrainConfig tc = cfg.train;
    tc.seed = train_seed;
    SelfLocalizationModel m;
    m.net = train_supervised(
        DenseNetwork::init(world.embedding_dim(), cfg.hidden_dim, world.num_classes(), net_seed),
        data, tc);
    m.classes_in_charge = charge;
    m.replay_buffer = std::move(data);
    return m;
}

}  // namespace detail

// Optional override of the random class assignment (e.g. forced-disjoint
// charges); empty means draw them from the seed.
inline ScenarioBase prepare_base(const ScenarioConfig& cfg, std::uint64_t seed,
                                 std::vector<std::vector<int>> fixed_charges = {}) {
    cfg.check();
    WorldConfig wc = cfg.world;
    wc.seed = mix_seed(seed, 0x776f726cull);
    ScenarioBase base{World(wc)};
    base.seed = seed;

    const int num_agents = cfg.num_teachers + 1;
    if (!fixed_charges.empty()) {
        if (static_cast<int>(fixed_charges.size()) != num_agents)
            throw std::invalid_argument("prepare_base: wrong number of fixed charges");
        base.charges = std::move(fixed_charges);
    } else {
        SplitMix64 assign_rng(mix_seed(seed, 0x6173676eull));
        base.charges =
            assign_classes(assign_rng, num_agents, cfg.classes_per_agent, wc.num_classes());
    }

    base.student0 = detail::train_agent(base.world, base.charges[0], cfg.student_session, cfg,
                                        mix_seed(seed, 0x696e6974ull, 0),
                                        mix_seed(seed, 0x7472ull, 0));
    for (int i = 1; i <= cfg.num_teachers; ++i)
        base.teachers.push_back(detail::train_agent(
            base.world, base.charges[i], teacher_session_id(i, cfg.student_session), cfg,
            mix_seed(seed, 0x696e6974ull, i), mix_seed(seed, 0x7472ull, i)));

    for (int cls : base.charges[0]) base.class_origin.emplace(cls, 0);
    for (int i = 1; i <= cfg.num_teachers; ++i)
        for (int cls : base.charges[i]) base.class_origin.emplace(cls, i);
    for (auto& [cls, stage] : base.class_origin) base.union_classes.insert(cls);

    base.test_set = build_test_set(base.world, base.union_classes, cfg.supervised_per_class);
    return base;
}

struct ScenarioResult {
    std::vector<StageMetrics> stages;
    std::vector<KtTranscript> transcripts;
};

// The recursive experiment: stage 0 is the supervised student; at each
// stage i the student runs KT against teacher i, generates cost-free
// self-KT samples for uncovered prior classes, balances the pool, and
// distills everything into a freshly initialized network.
inline ScenarioResult run_scenario_from_base(const ScenarioConfig& cfg, const ScenarioBase& base,
                                             bool keep_logs = false) {
    ScenarioResult result;
    const std::uint64_t seed = base.seed;

    // One batched forward pass per stage; top-1, per-origin, and per-class
    // accuracies all derive from the same predictions.
    Eigen::MatrixXf test_x(base.world.embedding_dim(), base.test_set.size());
    for (std::size_t j = 0; j < base.test_set.size(); ++j)
        test_x.col(j) = base.test_set[j].x.values;

    auto stage_metrics = [&](int stage, const SelfLocalizationModel& model, long cum_cost) {
        StageMetrics m;
        m.stage = stage;
        m.cumulative_cost = cum_cost;
        Eigen::MatrixXf logits = model.net.forward_batch(test_x);
        int correct = 0;
        std::map<int, std::pair<int, int>> per_class, per_origin;  // (hits, total)
        for (std::size_t j = 0; j < base.test_set.size(); ++j) {
            const int y = base.test_set[j].y;
            const bool hit = argmax_lowest(logits.col(j)) == y;
            correct += hit;
            auto& [ch, ct] = per_class[y];
            ++ct;
            ch += hit;
            auto& [oh, ot] = per_origin[base.class_origin.at(y)];
            ++ot;
            oh += hit;
        }
        m.top1_accuracy = static_cast<double>(correct) / base.test_set.size();
        for (auto& [cls, ht] : per_class)
            m.per_class_accuracy[cls] = static_cast<double>(ht.first) / ht.second;
        for (auto& [stg, ht] : per_origin)
            m.per_origin_accuracy[stg] = static_cast<double>(ht.first) / ht.second;
        return m;
    };

    SelfLocalizationModel student = base.student0;
    std::set<int> known(base.charges[0].begin(), base.charges[0].end());
    long cum_cost = 0;
    result.stages.push_back(stage_metrics(0, student, cum_cost));

    for (int i = 1; i <= cfg.num_teachers; ++i) {
        const SelfLocalizationModel& teacher = base.teachers[i - 1];

        QuestionerConfig qcfg = cfg.questioner;
        qcfg.seed = mix_seed(seed, 0x6b74ull, i);
        KtTranscript tr = execute_kt(qcfg, teacher, i, keep_logs);

        // Classes the new teacher covers come from the teacher; the rest of
        // the student's accumulated classes are retained via cost-free
        // self-KT against its previous self.
        std::set<int> self_classes = known;
        for (int cls : teacher.classes_in_charge) self_classes.erase(cls);
        KtSampleSet self_set =
            student_self_kt(student, self_classes, cfg.self_kt_per_class,
                            mix_seed(seed, 0x736b74ull, i), cfg.questioner.k);

        std::vector<Sample> pool = tr.samples.samples;
        pool.insert(pool.end(), self_set.samples.begin(), self_set.samples.end());
        if (pool.empty())
            throw std::runtime_error("stage " + std::to_string(i) + ": empty transfer pool");
        std::vector<Sample> balanced = balance_by_oversampling(pool);

        TrainConfig tc = cfg.train;
        tc.seed = mix_seed(seed, 0x7472ull, 100 + i);
        SelfLocalizationModel next;
        next.net = distill(DenseNetwork::init(base.world.embedding_dim(), cfg.hidden_dim,
                                              base.world.num_classes(),
                                              mix_seed(seed, 0x696e6974ull, 100 + i)),
                           balanced, tc);
        known.insert(teacher.classes_in_charge.begin(), teacher.classes_in_charge.end());
        next.classes_in_charge.assign(known.begin(), known.end());
        next.capabilities = student.capabilities;
        student = std::move(next);

        cum_cost += tr.billed_cost;
        result.transcripts.push_back(std::move(tr));
        result.stages.push_back(stage_metrics(i, student, cum_cost));
    }
    return result;
}

inline ScenarioResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed,
                                   bool keep_logs = false) {
    return run_scenario_from_base(cfg, prepare_base(cfg, seed), keep_logs);
}

// Supervised reference trained on the pooled data of all agents; the
// ceiling the replay scheme should approach at large T.
inline double monolithic_supervised_accuracy(const ScenarioConfig& cfg,
                                             const ScenarioBase& base) {
    std::vector<Sample> data;
    auto add = [&](const std::vector<int>& charge, int session) {
        for (int cls : charge) {
            auto cs = base.world.generate_class_samples(session, cls, cfg.supervised_per_class);
            data.insert(data.end(), cs.begin(), cs.end());
        }
    };
    add(base.charges[0], cfg.student_session);
    for (int i = 1; i <= cfg.num_teachers; ++i)
        add(base.charges[i], teacher_session_id(i, cfg.student_session));

    TrainConfig tc = cfg.train;
    tc.seed = mix_seed(base.seed, 0x7472ull, 999);
    DenseNetwork net = train_supervised(
        DenseNetwork::init(base.world.embedding_dim(), cfg.hidden_dim, base.world.num_classes(),
                           mix_seed(base.seed, 0x696e6974ull, 999)),
        data, tc);
    return evaluate_top1(net, base.test_set);
}

}  // namespace owdl
