#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace bell {

// Photon counts handed out one per counter read: a fixed list, or a seeded
// Poisson stream.
class DetectionScript {
public:
    static DetectionScript scripted(std::vector<std::int32_t> counts);
    // Repeats `pattern` forever.
    static DetectionScript cyclic(std::vector<std::int32_t> pattern);
    static DetectionScript poisson(std::uint64_t seed, double mean);

    // Throws DetectionScriptExhausted when a scripted list runs out.
    std::int32_t next();
    std::size_t consumed() const { return consumed_; }
    bool is_scripted() const { return !rng_.has_value() && !cyclic_; }

private:
    std::vector<std::int32_t> counts_;
    std::optional<std::mt19937_64> rng_;
    bool cyclic_ = false;
    double mean_ = 0.0;
    std::size_t consumed_ = 0;
};

}  // namespace bell
