#include "dift/diffusion/extractor.hpp"

#include <exception>
#include <string>

#include <json.hpp>

#include "dift/core/errors.hpp"

namespace dift {

std::vector<std::vector<Activation>> DenoiserClient::forward_batch(std::span<const Tensor3<double>> noisy, int t,
                                                                   const std::string& prompt) const {
    std::vector<std::vector<Activation>> out;
    out.reserve(noisy.size());
    for (const auto& x : noisy) out.push_back(forward(x, t, prompt));
    return out;
}

Tensor3<double> draw_noise(int channels, int height, int width, std::uint64_t rng_seed, int draw_index) {
    Tensor3<double> eps(channels, height, width);
    fill_standard_normal(eps.values(), draw_seed(rng_seed, draw_index));
    return eps;
}

void EnsembleMean::add(const Activation& grid) {
    if (count_ == 0) {
        channels_ = grid.channels();
        height_ = grid.height();
        width_ = grid.width();
        sum_.assign(grid.size(), 0.0);
    } else if (grid.channels() != channels_ || grid.height() != height_ || grid.width() != width_) {
        throw BackendError("ensemble draws returned activations of differing shapes");
    }
    auto v = grid.values();
    for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += static_cast<double>(v[i]);
    ++count_;
}

Activation EnsembleMean::mean() const {
    if (count_ == 0) throw ValidationError("ensemble mean of zero draws");
    std::vector<float> out(sum_.size());
    for (std::size_t i = 0; i < sum_.size(); ++i) out[i] = static_cast<float>(sum_[i] / count_);
    return Activation(channels_, height_, width_, std::move(out));
}

std::string extraction_meta_json(std::string_view backend_id, const ExtractionConfig& cfg) {
    nlohmann::ordered_json j;
    j["backend"] = backend_id;
    j["t"] = cfg.t;
    j["block_index"] = cfg.block_index;
    j["prompt"] = cfg.prompt;
    j["ensemble_size"] = cfg.ensemble_size;
    j["rng_seed"] = cfg.rng_seed;
    return j.dump();
}

void validate_for_client(const ExtractionConfig& cfg, const DenoiserClient& client) {
    cfg.validate();
    if (cfg.t >= client.schedule().steps()) {
        throw ValidationError("time step " + std::to_string(cfg.t) + " outside [0, " +
                              std::to_string(client.schedule().steps()) + ") for backend " + client.id());
    }
    if (cfg.block_index >= client.num_blocks()) {
        throw ValidationError("block index " + std::to_string(cfg.block_index) + " out of range: backend " +
                              client.id() + " has " + std::to_string(client.num_blocks()) + " upsampling blocks");
    }
}

namespace {

const Activation& pick_block(const std::vector<Activation>& blocks, int block_index, int draw) {
    if (block_index >= static_cast<int>(blocks.size())) {
        throw BackendError("draw " + std::to_string(draw) + ": backend returned " + std::to_string(blocks.size()) +
                           " blocks, block " + std::to_string(block_index) + " requested");
    }
    return blocks[static_cast<std::size_t>(block_index)];
}

}  // namespace

FeatureMap extract_dift(const ImageRef& image, const DenoiserClient& client, const ExtractionConfig& cfg) {
    validate_for_client(cfg, client);
    const Tensor3<double> latent = client.encode(image);
    const NoiseSchedule& schedule = client.schedule();

    std::vector<Tensor3<double>> noisy;
    noisy.reserve(static_cast<std::size_t>(cfg.ensemble_size));
    for (int d = 0; d < cfg.ensemble_size; ++d) {
        const auto eps = draw_noise(latent.channels(), latent.height(), latent.width(), cfg.rng_seed, d);
        noisy.push_back(add_noise(latent, cfg.t, eps, schedule));
    }

    EnsembleMean mean;
    if (client.supports_batching()) {
        std::vector<std::vector<Activation>> outputs;
        try {
            outputs = client.forward_batch(noisy, cfg.t, cfg.prompt);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw BackendError("batched draws [0, " + std::to_string(cfg.ensemble_size) + ") failed: " + e.what());
        }
        if (outputs.size() != noisy.size()) throw BackendError("backend returned the wrong number of batch results");
        for (int d = 0; d < cfg.ensemble_size; ++d) mean.add(pick_block(outputs[d], cfg.block_index, d));
    } else {
        for (int d = 0; d < cfg.ensemble_size; ++d) {
            std::vector<Activation> blocks;
            try {
                blocks = client.forward(noisy[d], cfg.t, cfg.prompt);
            } catch (const std::exception& e) {
                throw BackendError("draw " + std::to_string(d) + " failed: " + e.what());
            }
            mean.add(pick_block(blocks, cfg.block_index, d));
        }
    }
    return FeatureMap(mean.mean(), image.dims(), extraction_meta_json(client.id(), cfg));
}

}  // namespace dift
