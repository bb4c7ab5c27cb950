#include "dift/diffusion/schedule.hpp"

#include <cmath>
#include <sstream>

#include "dift/core/errors.hpp"

namespace dift {
namespace {

NoiseSchedule from_betas(const std::vector<double>& betas) {
    std::vector<double> alpha_bar(betas.size());
    double running = 1.0;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        running *= 1.0 - betas[i];
        alpha_bar[i] = running;
    }
    return NoiseSchedule(std::move(alpha_bar));
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
    if (alpha_bar_.empty()) throw ValidationError("noise schedule is empty");
    for (std::size_t i = 0; i < alpha_bar_.size(); ++i) {
        const double a = alpha_bar_[i];
        if (!std::isfinite(a) || a <= 0.0 || a > 1.0) {
            throw ValidationError("noise schedule entries must lie in (0, 1]");
        }
        if (i > 0 && !(a < alpha_bar_[i - 1])) {
            throw ValidationError("noise schedule must be strictly decreasing");
        }
    }
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
    if (steps < 2) throw ValidationError("schedule needs at least two steps");
    std::vector<double> betas(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        betas[i] = beta_start + (beta_end - beta_start) * i / (steps - 1);
    }
    return from_betas(betas);
}

NoiseSchedule NoiseSchedule::scaled_linear(int steps, double beta_start, double beta_end) {
    if (steps < 2) throw ValidationError("schedule needs at least two steps");
    const double lo = std::sqrt(beta_start);
    const double hi = std::sqrt(beta_end);
    std::vector<double> betas(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        const double s = lo + (hi - lo) * i / (steps - 1);
        betas[i] = s * s;
    }
    return from_betas(betas);
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t >= steps()) {
        throw ValidationError("time step " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + ")");
    }
    return alpha_bar_[static_cast<std::size_t>(t)];
}

Tensor3<double> add_noise(const Tensor3<double>& x0, int t, const Tensor3<double>& epsilon,
                          const NoiseSchedule& schedule) {
    if (!x0.same_shape(epsilon)) throw ValidationError("add_noise: x0 and epsilon shapes differ");
    const double a = schedule.alpha_bar(t);
    const double signal = std::sqrt(a);
    const double noise = std::sqrt(1.0 - a);
    Tensor3<double> out(x0.channels(), x0.height(), x0.width());
    auto dst = out.values();
    auto xs = x0.values();
    auto es = epsilon.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = signal * xs[i] + noise * es[i];
    return out;
}

std::string ExtractionConfig::canonical() const {
    std::ostringstream os;
    os << "t=" << t << ";block=" << block_index << ";ensemble=" << ensemble_size << ";seed=" << rng_seed
       << ";prompt_len=" << prompt.size() << ";prompt=" << prompt;
    return os.str();
}

void ExtractionConfig::validate() const {
    if (t < 0) throw ValidationError("time step must be non-negative");
    if (block_index < 0) throw ValidationError("block index must be non-negative");
    if (ensemble_size < 1) throw ValidationError("ensemble size must be at least 1");
}

std::string render_prompt(std::string_view prompt_template, std::string_view category) {
    static constexpr std::string_view kSlot = "[class]";
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t hit = prompt_template.find(kSlot, pos);
        if (hit == std::string_view::npos) break;
        out.append(prompt_template.substr(pos, hit - pos));
        out.append(category);
        pos = hit + kSlot.size();
    }
    out.append(prompt_template.substr(pos));
    return out;
}

}  // namespace dift
