#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace qsd {

/// Purpose tags keep the noise, readout and test streams of one trajectory
/// disjoint.
enum class StreamTag : uint64_t {
    Noise = 0x6e6f697365ULL,
    Readout = 0x72656164ULL,
    Auxiliary = 0x617578ULL,
};

/// SplitMix64 (Steele, Lea & Flood 2014). Counter-based: the n-th output is
/// mix(key + n * 0x9E3779B97F4A7C15), so a stream is a pure function of its key.
class Stream {
   public:
    static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    explicit Stream(uint64_t key) : counter_(key) {
    }

    /// Stream for (master_seed, trajectory_index, tag). The key is the
    /// double-mixed combination so neighbouring indices share no structure.
    static Stream for_trajectory(uint64_t master_seed, uint64_t index, StreamTag tag = StreamTag::Noise) {
        uint64_t k = mix(master_seed ^ mix(static_cast<uint64_t>(tag)));
        k = mix(k + kGolden * (index + 1));
        return Stream(k);
    }

    static constexpr uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    uint64_t next() {
        counter_ += kGolden;
        return mix(counter_);
    }

    /// Uniform on (0, 1): 53 random bits, never exactly 0.
    double uniform() {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Two independent standard normals (Box-Muller).
    std::pair<double, double> normal_pair() {
        double r = std::sqrt(-2.0 * std::log(uniform()));
        double phi = 2.0 * std::numbers::pi * uniform();
        return {r * std::cos(phi), r * std::sin(phi)};
    }

   private:
    uint64_t counter_;
};

}  // namespace qsd
