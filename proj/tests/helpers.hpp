#pragma once

// Shared small-scale fixtures: a 4x4-grid world and trained agents, cached
// so the unit binary trains each at most once.

#include <vector>

#include "owdl/models.hpp"
#include "owdl/neuralnet.hpp"
#include "owdl/scenario.hpp"
#include "owdl/worldgen.hpp"

namespace fixtures {

inline owdl::WorldConfig small_world_config() {
    owdl::WorldConfig wc;
    wc.grid_side = 4;
    wc.embedding_dim = 16;
    wc.khot = 3;
    wc.seed = 5;
    return wc;
}

inline const owdl::World& small_world() {
    static owdl::World world(small_world_config());
    return world;
}

// Teacher in charge of classes {0..9}, trained on session 6, full capability.
inline const owdl::SelfLocalizationModel& small_teacher() {
    static owdl::SelfLocalizationModel teacher = [] {
        const owdl::World& world = small_world();
        owdl::SelfLocalizationModel m;
        for (int c = 0; c < 10; ++c) m.classes_in_charge.push_back(c);
        std::vector<owdl::Sample> data;
        for (int c : m.classes_in_charge) {
            auto cs = world.generate_class_samples(6, c, 40);
            data.insert(data.end(), cs.begin(), cs.end());
        }
        owdl::TrainConfig tc;
        tc.epochs = 20;
        tc.seed = 17;
        m.net = owdl::train_supervised(owdl::DenseNetwork::init(16, 64, 16, 3), data, tc);
        m.replay_buffer = std::move(data);
        return m;
    }();
    return teacher;
}

inline owdl::ScenarioConfig small_scenario_config() {
    owdl::ScenarioConfig cfg;
    cfg.world = small_world_config();
    cfg.classes_per_agent = 4;
    cfg.supervised_per_class = 20;
    cfg.self_kt_per_class = 10;
    cfg.hidden_dim = 32;
    cfg.questioner.k = 3;
    cfg.questioner.T = 2;
    cfg.questioner.R = 1;
    cfg.train.epochs = 10;
    return cfg;
}

inline bool same_rrf(const owdl::RrfVector& a, const owdl::RrfVector& b) {
    return a.dim() == b.dim() && a.values == b.values;
}

inline bool same_params(const owdl::DenseNetwork& a, const owdl::DenseNetwork& b) {
    return a.layer_dims == b.layer_dims && a.w1 == b.w1 && a.w2 == b.w2 && a.b1 == b.b1 &&
           a.b2 == b.b2;
}

}  // namespace fixtures
