#pragma once

#include <cstdint>
#include <string_view>

#include "dift/core/random.hpp"
#include "dift/core/types.hpp"
#include "dift/diffusion/denoiser.hpp"
#include "dift/diffusion/schedule.hpp"

namespace dift {

/// Seed of the draw_index-th noise sample of an ensemble.
inline std::uint64_t draw_seed(std::uint64_t rng_seed, int draw_index) {
    return derive_seed(rng_seed, static_cast<std::uint64_t>(draw_index));
}

/// Standard-normal tensor of the given shape for one ensemble draw.
Tensor3<double> draw_noise(int channels, int height, int width, std::uint64_t rng_seed, int draw_index);

/// Running elementwise mean of same-shaped activation grids. Accumulates in
/// double in insertion order so two identical sequences give identical bits.
class EnsembleMean {
public:
    void add(const Activation& grid);
    int count() const { return count_; }
    Activation mean() const;

private:
    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    int count_ = 0;
    std::vector<double> sum_;
};

/// JSON metadata attached to extracted feature maps.
std::string extraction_meta_json(std::string_view backend_id, const ExtractionConfig& cfg);

/// Throws ValidationError if cfg does not fit the client (t, block index).
void validate_for_client(const ExtractionConfig& cfg, const DenoiserClient& client);

/// Diffusion features of a real image: encode, forward-noise to cfg.t with
/// cfg.ensemble_size independent draws, read block cfg.block_index from each
/// network pass and average the activations.
FeatureMap extract_dift(const ImageRef& image, const DenoiserClient& client, const ExtractionConfig& cfg);

}  // namespace dift
