#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>

namespace owdl {

using Vec = Eigen::VectorXf;

// Where a training sample came from; carried through merge/balance so the
// forgetting analysis can attribute accuracy to acquisition stage.
enum class Origin { supervised, replay, rr, entropy, mixup, self_kt };

inline const char* origin_name(Origin o) {
    switch (o) {
        case Origin::supervised: return "supervised";
        case Origin::replay: return "replay";
        case Origin::rr: return "rr";
        case Origin::entropy: return "entropy";
        case Origin::mixup: return "mixup";
        case Origin::self_kt: return "self_kt";
    }
    return "?";
}

// Class-posterior vector P(c|x); entries non-negative, summing to 1.
struct ProbabilityMap {
    Vec values;

    int num_classes() const { return static_cast<int>(values.size()); }

    bool valid(float tol = 1e-6f) const {
        if (values.size() == 0) return false;
        if ((values.array() < 0.0f).any()) return false;
        return std::abs(values.sum() - 1.0f) <= tol;
    }
};

// Reciprocal-rank feature vector: entry i holds 1/rank(i) of an underlying
// score vector (rank 1 = highest score); a k-hot RRF zeroes all but the k
// best-ranked entries.
struct RrfVector {
    Vec values;

    int dim() const { return static_cast<int>(values.size()); }

    int nonzeros() const {
        return static_cast<int>((values.array() != 0.0f).count());
    }
};

struct Sample {
    RrfVector x;
    int y = 0;
    std::optional<ProbabilityMap> soft_label;
    Origin origin = Origin::supervised;
};

}  // namespace owdl
