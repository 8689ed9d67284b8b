#include "vad/init.hpp"

#include <cmath>

namespace vad {

Tensor kaiming_init(Shape shape, int64_t fan_in, Rng& rng) {
    if (fan_in < 1) throw DataError("kaiming_init: fan_in must be >= 1");
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    auto n = static_cast<std::size_t>(shape_numel(shape));
    std::vector<double> data(n);
    for (auto& v : data) v = rng.normal(0.0, stddev);
    return Tensor::param(std::move(shape), std::move(data));
}

}  // namespace vad
