#include "dift/diffusion/toy_backend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dift/diffusion/extractor.hpp"

namespace dift {

const NoiseSchedule& toy_schedule() {
    static const NoiseSchedule schedule = NoiseSchedule::linear(1000, 1e-4, 0.02);
    return schedule;
}

int toy_block_stride(int block_index) {
    if (block_index < 0 || block_index >= kToyBlocks) throw ValidationError("toy block index out of range");
    return 1 << (block_index + 1);
}

Dims toy_grid_dims(Dims image, int block_index) {
    const int s = toy_block_stride(block_index);
    return {std::max(1, image.height / s), std::max(1, image.width / s)};
}

Tensor3<double> toy_encode(const ImageRef& image) {
    Tensor3<double> latent(3, image.height(), image.width());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) latent(c, y, x) = kToyLatentGain * (2.0 * image.at(y, x, c) - 1.0);
        }
    }
    return latent;
}

Activation toy_block_activation(const Tensor3<double>& latent, int block_index) {
    if (latent.channels() != 3) throw ValidationError("toy latent must have 3 channels");
    const int H = latent.height();
    const int W = latent.width();
    const Dims grid = toy_grid_dims({H, W}, block_index);

    std::vector<double> lum(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            lum[static_cast<std::size_t>(y) * W + x] =
                0.299 * latent(0, y, x) + 0.587 * latent(1, y, x) + 0.114 * latent(2, y, x);
        }
    }
    auto L = [&](int y, int x) { return lum[static_cast<std::size_t>(y) * W + x]; };

    Activation out(kToyChannels, grid.height, grid.width);
    for (int i = 0; i < grid.height; ++i) {
        const int y0 = static_cast<int>(static_cast<long long>(i) * H / grid.height);
        const int y1 = static_cast<int>(static_cast<long long>(i + 1) * H / grid.height);
        for (int j = 0; j < grid.width; ++j) {
            const int x0 = static_cast<int>(static_cast<long long>(j) * W / grid.width);
            const int x1 = static_cast<int>(static_cast<long long>(j + 1) * W / grid.width);
            double color[3] = {0.0, 0.0, 0.0};
            double gx = 0.0;
            double gy = 0.0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    for (int c = 0; c < 3; ++c) color[c] += latent(c, y, x);
                    gx += L(y, std::min(x + 1, W - 1)) - L(y, x);
                    gy += L(std::min(y + 1, H - 1), x) - L(y, x);
                }
            }
            const double n = static_cast<double>((y1 - y0) * (x1 - x0));
            const double scale = 1.0 / (n * kToyLatentGain);
            for (int c = 0; c < 3; ++c) out(c, i, j) = static_cast<float>(color[c] * scale);
            out(3, i, j) = static_cast<float>(kToyGradientGain * gx * scale);
            out(4, i, j) = static_cast<float>(kToyGradientGain * gy * scale);

            const double u = 2.0 * std::numbers::pi * (j + 0.5) / grid.width;
            const double v = 2.0 * std::numbers::pi * (i + 0.5) / grid.height;
            out(5, i, j) = static_cast<float>(kToyPositionWeight * std::sin(u));
            out(6, i, j) = static_cast<float>(kToyPositionWeight * std::cos(u));
            out(7, i, j) = static_cast<float>(kToyPositionWeight * std::sin(v));
            out(8, i, j) = static_cast<float>(kToyPositionWeight * std::cos(v));
        }
    }
    return out;
}

std::vector<Activation> ToyDenoiser::forward(const Tensor3<double>& noisy, int t, const std::string&) const {
    toy_schedule().alpha_bar(t);  // range check
    std::vector<Activation> blocks;
    blocks.reserve(kToyBlocks);
    for (int n = 0; n < kToyBlocks; ++n) blocks.push_back(toy_block_activation(noisy, n));
    return blocks;
}

FeatureMap toy_extract(const ImageRef& image, const ExtractionConfig& cfg) {
    const ToyDenoiser client;
    validate_for_client(cfg, client);
    const Tensor3<double> latent = toy_encode(image);
    EnsembleMean mean;
    for (int d = 0; d < cfg.ensemble_size; ++d) {
        const auto eps = draw_noise(latent.channels(), latent.height(), latent.width(), cfg.rng_seed, d);
        mean.add(toy_block_activation(add_noise(latent, cfg.t, eps, toy_schedule()), cfg.block_index));
    }
    return FeatureMap(mean.mean(), image.dims(), extraction_meta_json(kToyBackendId, cfg));
}

}  // namespace dift
