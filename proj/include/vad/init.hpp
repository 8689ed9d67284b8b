#pragma once

#include <cstdint>
#include <random>

#include "vad/tensor.hpp"

namespace vad {

// All randomness in a run flows from one root seed; components derive
// their own streams with fixed offsets so runs are reproducible.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(gen_);
    }
    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }
    uint64_t integer(uint64_t lo, uint64_t hi) {  // inclusive bounds
        return std::uniform_int_distribution<uint64_t>(lo, hi)(gen_);
    }
    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

// Zero-mean normal draws with variance 2/fan_in.
Tensor kaiming_init(Shape shape, int64_t fan_in, Rng& rng);

}  // namespace vad
