#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

namespace mmdg {

// SplitMix64 step.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

// Counter-based random stream. A stream is fully determined by its key, so
// per-(sample, timestep) streams give schedule-independent results no matter
// how work is split across threads.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : state_(key) {}

    // Stream keyed by (seed, tag, index, timestep).
    static CounterRng keyed(std::uint64_t seed, std::uint64_t tag,
                            std::uint64_t index, std::uint64_t timestep) {
        return CounterRng(mix_key(mix_key(mix_key(seed, tag), index), timestep));
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in (0,1).
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    // Standard normal via Box-Muller.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_uniform();
        double u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    Eigen::VectorXd normal_vector(int d) {
        Eigen::VectorXd v(d);
        for (int i = 0; i < d; ++i) v[i] = next_normal();
        return v;
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mmdg
