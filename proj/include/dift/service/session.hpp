#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>

#include "dift/diffusion/backend.hpp"
#include "dift/service/config.hpp"

namespace dift {

/// Feature cache root from DIFT_CACHE_DIR, when set and non-empty.
std::optional<std::string> cache_dir_from_env();

/// The process-wide backend: "toy" or a sidecar base URL. The feature cache
/// lives under cfg.cache_dir, else DIFT_CACHE_DIR, else memory only.
std::shared_ptr<FeatureBackend> make_backend(const AppConfig& cfg);

/// Images registered with the service plus the shared backend. The registry
/// is guarded by a readers-writer lock; extraction passes through a bounded
/// gate so at most max_inflight_extractions requests reach the model at once.
class Session {
public:
    Session(std::shared_ptr<FeatureBackend> backend, AppConfig config);

    /// Registers an image under a fresh id ("img-1", "img-2", ...); uploads
    /// are never deduplicated.
    std::string add_image(const ImageRef& image);
    std::shared_ptr<const ImageRef> image(const std::string& id) const;
    std::size_t image_count() const;

    FeatureMap extract(const ImageRef& image, const ExtractionConfig& cfg) const;
    /// Runs fn while holding one extraction slot.
    void with_model(const std::function<void()>& fn) const;

    const FeatureBackend& backend() const { return *backend_; }
    const AppConfig& config() const { return config_; }

private:
    std::shared_ptr<FeatureBackend> backend_;
    AppConfig config_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<const ImageRef>> images_;
    std::uint64_t next_id_ = 1;
    mutable std::counting_semaphore<1024> gate_;
};

}  // namespace dift
