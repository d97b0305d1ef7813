#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "owdl/rng.hpp"
#include "owdl/types.hpp"

namespace owdl {

// Synthetic world: a grid_side x grid_side grid of place-classes with
// per-session prototype drift, emitting k-hot RRF samples.
struct WorldConfig {
    int grid_side = 10;
    int embedding_dim = 100;  // N; defaults to the class count
    int num_sessions = 27;
    float session_drift = 0.1f;
    float sample_noise = 0.2f;
    int khot = 10;
    std::uint64_t seed = 0;

    int num_classes() const { return grid_side * grid_side; }

    void check() const {
        if (grid_side <= 0) throw std::invalid_argument("grid_side must be positive");
        if (embedding_dim < 1) throw std::invalid_argument("embedding_dim must be >= 1");
        if (num_sessions < 3)
            throw std::invalid_argument("num_sessions must be >= 3 (test + student + teacher)");
        if (session_drift < 0) throw std::invalid_argument("session_drift must be >= 0");
        if (sample_noise < 0) throw std::invalid_argument("sample_noise must be >= 0");
        if (khot < 1 || khot > embedding_dim)
            throw std::invalid_argument("khot must be in [1, embedding_dim]");
    }
};

// Grid cell containing normalized bird's-eye coordinates (u, v).
inline int class_of_cell(double u, double v, int grid_side) {
    if (u < 0 || u >= 1 || v < 0 || v >= 1)
        throw std::invalid_argument("class_of_cell: coordinates must lie in [0,1)");
    const int col = static_cast<int>(std::floor(u * grid_side));
    const int row = static_cast<int>(std::floor(v * grid_side));
    return row * grid_side + col;
}

// Full reciprocal-rank feature of a score vector; rank 1 = highest score,
// ties broken by ascending index.
inline RrfVector scores_to_rrf(const Vec& scores) {
    const int n = static_cast<int>(scores.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&scores](int a, int b) { return scores(a) > scores(b); });
    RrfVector out;
    out.values.resize(n);
    for (int rank = 0; rank < n; ++rank)
        out.values(idx[rank]) = 1.0f / static_cast<float>(rank + 1);
    return out;
}

// Keeps the k best-ranked entries (largest values), zeroes the rest.
inline RrfVector khot_truncate(const RrfVector& rrf, int k) {
    const int n = rrf.dim();
    if (k < 1 || k > n) throw std::invalid_argument("khot_truncate: k out of range");
    RrfVector out = rrf;
    const float cutoff = 1.0f / static_cast<float>(k);
    for (int i = 0; i < n; ++i)
        if (out.values(i) < cutoff) out.values(i) = 0.0f;
    return out;
}

class World {
public:
    explicit World(WorldConfig cfg) : cfg_(cfg) {
        cfg_.check();
        if (cfg_.embedding_dim < cfg_.num_classes())
            throw std::invalid_argument("embedding_dim must cover the class-score space");
    }

    const WorldConfig& config() const { return cfg_; }
    int num_classes() const { return cfg_.num_classes(); }
    int embedding_dim() const { return cfg_.embedding_dim; }

    // Class-prototype affinity, peaking at the class's own cell and decaying
    // with Chebyshev grid distance so neighboring places are confusable.
    float affinity(int cls, int dim) const {
        if (dim >= cfg_.num_classes()) return 0.0f;
        const int g = cfg_.grid_side;
        const int dr = std::abs(cls / g - dim / g);
        const int dc = std::abs(cls % g - dim % g);
        const int d = std::max(dr, dc);
        return std::exp(-static_cast<float>(d));
    }

    // Per-session perturbation of class cls's prototype; deterministic in
    // (seed, session_id, cls).
    Vec drift(int session_id, int cls) const {
        Vec v = Vec::Zero(cfg_.embedding_dim);
        if (cfg_.session_drift == 0.0f) return v;
        SplitMix64 rng(mix_seed(cfg_.seed, 0x64726966ull, session_id, cls));
        for (int i = 0; i < v.size(); ++i)
            v(i) = cfg_.session_drift * static_cast<float>(rng.next_normal());
        return v;
    }

    // One sample of class cls in the given session. sample_index makes the
    // draw independent of which other samples were generated.
    Sample make_sample(int session_id, int cls, int sample_index, Origin origin) const {
        check_session(session_id);
        if (cls < 0 || cls >= cfg_.num_classes())
            throw std::invalid_argument("make_sample: class out of range");
        Vec scores = drift(session_id, cls);
        for (int i = 0; i < scores.size(); ++i) scores(i) += affinity(cls, i);
        if (cfg_.sample_noise > 0.0f) {
            SplitMix64 rng(mix_seed(cfg_.seed, 0x6e6f697aull, session_id, cls, sample_index));
            for (int i = 0; i < scores.size(); ++i)
                scores(i) += cfg_.sample_noise * static_cast<float>(rng.next_normal());
        }
        Sample s;
        s.x = khot_truncate(scores_to_rrf(scores), cfg_.khot);
        s.y = cls;
        s.origin = origin;
        return s;
    }

    std::vector<Sample> generate_class_samples(int session_id, int cls, int per_class,
                                               Origin origin = Origin::supervised) const {
        std::vector<Sample> out;
        out.reserve(per_class);
        for (int i = 0; i < per_class; ++i)
            out.push_back(make_sample(session_id, cls, i, origin));
        return out;
    }

    // per_class samples for every class of the session.
    std::vector<Sample> generate_session_samples(int session_id, int per_class) const {
        check_session(session_id);
        std::vector<Sample> out;
        out.reserve(static_cast<std::size_t>(per_class) * cfg_.num_classes());
        for (int cls = 0; cls < cfg_.num_classes(); ++cls) {
            auto cs = generate_class_samples(session_id, cls, per_class);
            out.insert(out.end(), cs.begin(), cs.end());
        }
        return out;
    }

private:
    void check_session(int session_id) const {
        if (session_id < 0 || session_id >= cfg_.num_sessions)
            throw std::invalid_argument("session_id out of range");
    }

    WorldConfig cfg_;
};

}  // namespace owdl
