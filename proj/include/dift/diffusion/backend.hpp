#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include "dift/diffusion/denoiser.hpp"
#include "dift/diffusion/extractor.hpp"
#include "dift/diffusion/feature_cache.hpp"

namespace dift {

/// Resolves an image reference (usually a manifest-relative path) to pixels.
/// Evaluators may call it from several threads at once.
using ImageProvider = std::function<ImageRef(const std::string& image)>;

/// Cache-aware feature extractor bound to one denoiser. This is the
/// "backend" handed to every evaluation and to the edit propagator.
class FeatureBackend {
public:
    explicit FeatureBackend(std::shared_ptr<const DenoiserClient> client,
                            std::shared_ptr<FeatureCache> cache = nullptr);

    std::string id() const { return client_->id(); }
    const DenoiserClient& client() const { return *client_; }
    FeatureCache* cache() const { return cache_.get(); }

    void validate(const ExtractionConfig& cfg) const { validate_for_client(cfg, *client_); }

    /// Features for (image, cfg); served from the cache when present.
    FeatureMap extract(const ImageRef& image, const ExtractionConfig& cfg) const;

private:
    std::shared_ptr<const DenoiserClient> client_;
    std::shared_ptr<FeatureCache> cache_;
    // Serializes calls into clients that are not thread safe (one model, one device).
    mutable std::mutex client_mutex_;
};

/// Backend over the built-in toy denoiser, with an in-memory cache.
std::shared_ptr<FeatureBackend> make_toy_backend(std::shared_ptr<FeatureCache> cache = nullptr);

}  // namespace dift
