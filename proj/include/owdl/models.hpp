#pragma once

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "owdl/neuralnet.hpp"
#include "owdl/types.hpp"
#include "owdl/worldgen.hpp"

namespace owdl {

// What a blackbox teacher is willing (or able) to expose. A top-1 label
// answer is always available; retrieval-engine-type teachers expose rank
// vectors but no probability map.
struct TeacherCapabilities {
    bool gives_probability_map = true;
    bool gives_rank_vector = true;
    bool gives_replay_samples = true;
};

struct Answer {
    int top1 = 0;
    std::optional<ProbabilityMap> prob_map;
    std::optional<RrfVector> rank_vector;
};

// A dense classifier plus the metadata that makes it an agent: its
// classes-in-charge, answer capabilities, and an optional replay buffer.
struct SelfLocalizationModel {
    DenseNetwork net;
    std::vector<int> classes_in_charge;
    TeacherCapabilities capabilities;
    std::vector<Sample> replay_buffer;

    void check() const {
        if (classes_in_charge.empty())
            throw std::invalid_argument("classes_in_charge must be non-empty");
        for (int c : classes_in_charge)
            if (c < 0 || c >= net.num_classes())
                throw std::invalid_argument("classes_in_charge entry out of range");
    }

    bool in_charge(int cls) const {
        return std::find(classes_in_charge.begin(), classes_in_charge.end(), cls) !=
               classes_in_charge.end();
    }
};

// One question-answer step. Fields beyond the capability flags are never
// populated, whatever the caller asks.
inline Answer answer_query(const SelfLocalizationModel& model, const RrfVector& x) {
    Eigen::VectorXf logits = forward(model.net, x);
    Answer a;
    a.top1 = argmax_lowest(logits);
    if (model.capabilities.gives_probability_map) {
        a.prob_map = softmax_temp(logits, 1.0);
        a.top1 = argmax_lowest(a.prob_map->values);
    }
    if (model.capabilities.gives_rank_vector) a.rank_vector = scores_to_rrf(logits);
    return a;
}

// Up to per_class stored training samples for each class-in-charge, in
// buffer insertion order. Refused when the teacher keeps no samples.
inline std::vector<Sample> harvest_replay(const SelfLocalizationModel& model, int per_class) {
    if (!model.capabilities.gives_replay_samples)
        throw std::runtime_error("replay unavailable: teacher keeps no training samples");
    if (model.replay_buffer.empty())
        throw std::runtime_error("replay unavailable: empty buffer");
    std::vector<Sample> out;
    for (int cls : model.classes_in_charge) {
        int taken = 0;
        for (const Sample& s : model.replay_buffer) {
            if (s.y != cls) continue;
            Sample copy = s;
            copy.origin = Origin::replay;
            out.push_back(std::move(copy));
            if (++taken == per_class) break;
        }
    }
    return out;
}

// Model snapshot: the network record followed by classes-in-charge and
// capability flags.
inline void save_model(const SelfLocalizationModel& model, std::ostream& out) {
    save_network(model.net, out);
    std::int32_t n = static_cast<std::int32_t>(model.classes_in_charge.size());
    out.write(reinterpret_cast<const char*>(&n), 4);
    for (int c : model.classes_in_charge) {
        std::int32_t v = c;
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    const char flags[3] = {
        static_cast<char>(model.capabilities.gives_probability_map),
        static_cast<char>(model.capabilities.gives_rank_vector),
        static_cast<char>(model.capabilities.gives_replay_samples)};
    out.write(flags, 3);
    if (!out) throw std::runtime_error("save_model: write failed");
}

inline SelfLocalizationModel load_model(std::istream& in) {
    SelfLocalizationModel m;
    m.net = load_network<float>(in);
    std::int32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    if (!in || n <= 0) throw std::runtime_error("load_model: bad class count");
    m.classes_in_charge.resize(n);
    for (auto& c : m.classes_in_charge) {
        std::int32_t v;
        in.read(reinterpret_cast<char*>(&v), 4);
        c = v;
    }
    char flags[3];
    in.read(flags, 3);
    if (!in) throw std::runtime_error("load_model: truncated record");
    m.capabilities = {flags[0] != 0, flags[1] != 0, flags[2] != 0};
    return m;
}

}  // namespace owdl
