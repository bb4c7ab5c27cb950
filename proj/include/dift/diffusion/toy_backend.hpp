#pragma once

#include "dift/diffusion/denoiser.hpp"
#include "dift/diffusion/schedule.hpp"

namespace dift {

// Deterministic stand-in for a diffusion U-Net, used for offline testing.
//
// The "latent" is the RGB image mapped to [-1, 1] (pixel-space diffusion
// convention) and scaled by kToyLatentGain. Block n pools the
// noisy latent over s x s cells (s = 2^(n+1)) and emits, per cell:
//   3 channels  mean color,
//   2 channels  mean horizontal / vertical luminance difference (gain 4),
//   4 channels  sin/cos encoding of the cell's normalized position.
// The first five channels are divided by kToyLatentGain again, so the noise
// reaching the descriptor has magnitude sqrt(1 - alpha_bar_t) / kToyLatentGain
// (times the pooled noise) while the signal is scaled by sqrt(alpha_bar_t).
inline constexpr int kToyBlocks = 4;
inline constexpr int kToyChannels = 9;
inline constexpr double kToyLatentGain = 50.0;
inline constexpr double kToyGradientGain = 4.0;
inline constexpr double kToyPositionWeight = 0.05;
inline constexpr const char* kToyBackendId = "toy-v1";

/// Linear DDPM schedule with T = 1000.
const NoiseSchedule& toy_schedule();

/// Pooling factor of block n.
int toy_block_stride(int block_index);
/// Grid dims of block n for an image of the given dims.
Dims toy_grid_dims(Dims image, int block_index);

Tensor3<double> toy_encode(const ImageRef& image);
/// Descriptor grid of one block for one (noisy) latent.
Activation toy_block_activation(const Tensor3<double>& latent, int block_index);

class ToyDenoiser final : public DenoiserClient {
public:
    std::string id() const override { return kToyBackendId; }
    const NoiseSchedule& schedule() const override { return toy_schedule(); }
    int num_blocks() const override { return kToyBlocks; }
    Tensor3<double> encode(const ImageRef& image) const override { return toy_encode(image); }
    std::vector<Activation> forward(const Tensor3<double>& noisy, int t, const std::string& prompt) const override;
    bool thread_safe() const override { return true; }
};

/// Same result as extract_dift(image, ToyDenoiser{}, cfg), computed without
/// the client indirection.
FeatureMap toy_extract(const ImageRef& image, const ExtractionConfig& cfg);

}  // namespace dift
