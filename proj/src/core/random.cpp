#include "dift/core/random.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace dift {

void fill_standard_normal(std::span<double> out, std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    // 53-bit uniform in (0, 1]; never zero so the log is finite.
    auto uniform = [&engine] {
        return (static_cast<double>(engine() >> 11) + 1.0) * 0x1.0p-53;
    };
    std::size_t i = 0;
    while (i < out.size()) {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        out[i++] = r * std::cos(theta);
        if (i < out.size()) out[i++] = r * std::sin(theta);
    }
}

}  // namespace dift
