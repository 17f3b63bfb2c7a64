#include "bell/detection.hpp"

#include "bell/errors.hpp"

namespace bell {

DetectionScript DetectionScript::scripted(std::vector<std::int32_t> counts) {
    DetectionScript d;
    d.counts_ = std::move(counts);
    return d;
}

DetectionScript DetectionScript::cyclic(std::vector<std::int32_t> pattern) {
    if (pattern.empty()) {
        throw ValidationError("cyclic detection pattern is empty");
    }
    DetectionScript d;
    d.counts_ = std::move(pattern);
    d.cyclic_ = true;
    return d;
}

DetectionScript DetectionScript::poisson(std::uint64_t seed, double mean) {
    DetectionScript d;
    d.rng_.emplace(seed);
    d.mean_ = mean;
    return d;
}

std::int32_t DetectionScript::next() {
    if (rng_) {
        ++consumed_;
        return std::poisson_distribution<std::int32_t>(mean_)(*rng_);
    }
    if (cyclic_) {
        return counts_[consumed_++ % counts_.size()];
    }
    if (consumed_ >= counts_.size()) {
        throw DetectionScriptExhausted("detection script has only " + std::to_string(counts_.size()) + " counts");
    }
    return counts_[consumed_++];
}

}  // namespace bell
