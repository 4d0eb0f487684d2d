#pragma once

#include <cstdint>
#include <random>

#include "binmhe/types.hpp"

namespace binmhe {

/// Purpose tags so that independent quantities of one trial never share draws.
enum class StreamPurpose : std::uint32_t {
    process_noise = 1,
    measurement_noise = 2,
    initial_state = 3,
    prior = 4,
    phase = 5,
};

/// Random stream keyed by (seed, trial, purpose).
///
/// Each key owns its own engine, so trial k of a Monte Carlo run yields the
/// same draws no matter how many trials run before it or in which order.
/// Within a stream, draws are consumed in time order.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t trial, StreamPurpose purpose) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                          static_cast<std::uint32_t>(purpose)};
        engine_.seed(seq);
    }

    /// Uniform draw in [lo, hi]; returns lo when the interval is degenerate.
    double uniform(double lo, double hi) {
        if (!(hi > lo)) return lo;
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    template <typename Scalar>
    Vec<Scalar> uniform_box(const Vec<Scalar>& half_width) {
        Vec<Scalar> v(half_width.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double h = static_cast<double>(half_width(i));
            v(i) = static_cast<Scalar>(uniform(-h, h));
        }
        return v;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace binmhe
