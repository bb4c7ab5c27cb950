#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dift/core/tensor.hpp"

namespace dift {

/// Cumulative signal retention alpha_bar[t] for t in [0, T).
class NoiseSchedule {
public:
    /// Throws ValidationError unless values are strictly decreasing and in (0, 1].
    explicit NoiseSchedule(std::vector<double> alpha_bar);

    /// DDPM linear betas (ADM default: 1e-4 .. 0.02).
    static NoiseSchedule linear(int steps = 1000, double beta_start = 1e-4, double beta_end = 0.02);
    /// Betas linear in sqrt space (latent diffusion default: 0.00085 .. 0.012).
    static NoiseSchedule scaled_linear(int steps = 1000, double beta_start = 0.00085, double beta_end = 0.012);

    int steps() const { return static_cast<int>(alpha_bar_.size()); }
    double alpha_bar(int t) const;
    const std::vector<double>& values() const { return alpha_bar_; }

private:
    std::vector<double> alpha_bar_;
};

/// Forward-noises x0 to step t: sqrt(a) * x0 + sqrt(1 - a) * epsilon, a = alpha_bar[t].
Tensor3<double> add_noise(const Tensor3<double>& x0, int t, const Tensor3<double>& epsilon,
                          const NoiseSchedule& schedule);

struct ExtractionConfig {
    int t = 261;
    int block_index = 1;
    std::string prompt;
    int ensemble_size = 8;
    std::uint64_t rng_seed = 0;

    bool operator==(const ExtractionConfig&) const = default;

    /// Every field, in a fixed order; used for cache keys and report metadata.
    std::string canonical() const;
    /// Checks the fields that do not depend on a backend.
    void validate() const;
};

/// Substitutes every "[class]" in the template with `category`.
std::string render_prompt(std::string_view prompt_template, std::string_view category);

}  // namespace dift
