#include "dift/diffusion/backend.hpp"

#include "dift/diffusion/toy_backend.hpp"

namespace dift {

FeatureBackend::FeatureBackend(std::shared_ptr<const DenoiserClient> client, std::shared_ptr<FeatureCache> cache)
    : client_(std::move(client)), cache_(std::move(cache)) {
    if (!client_) throw ValidationError("backend requires a denoiser client");
}

FeatureMap FeatureBackend::extract(const ImageRef& image, const ExtractionConfig& cfg) const {
    validate(cfg);
    std::string key;
    if (cache_) {
        key = feature_cache_key(image, client_->id(), cfg);
        if (auto hit = cache_->get(key)) return std::move(*hit);
    }
    FeatureMap features = [&] {
        if (client_->thread_safe()) return extract_dift(image, *client_, cfg);
        std::lock_guard lock(client_mutex_);
        return extract_dift(image, *client_, cfg);
    }();
    if (cache_) cache_->put(key, features);
    return features;
}

std::shared_ptr<FeatureBackend> make_toy_backend(std::shared_ptr<FeatureCache> cache) {
    if (!cache) cache = std::make_shared<FeatureCache>();
    return std::make_shared<FeatureBackend>(std::make_shared<ToyDenoiser>(), std::move(cache));
}

}  // namespace dift
