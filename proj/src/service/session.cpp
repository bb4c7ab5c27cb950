#include "dift/service/session.hpp"

#include <algorithm>
#include <cstdlib>
#include <mutex>

#include "dift/core/errors.hpp"
#include "dift/diffusion/remote_client.hpp"

namespace dift {

std::optional<std::string> cache_dir_from_env() {
    const char* v = std::getenv("DIFT_CACHE_DIR");
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

std::shared_ptr<FeatureBackend> make_backend(const AppConfig& cfg) {
    std::optional<std::filesystem::path> dir;
    if (cfg.cache_dir) {
        dir = *cfg.cache_dir;
    } else if (auto env = cache_dir_from_env()) {
        dir = *env;
    }
    auto cache = std::make_shared<FeatureCache>(dir, cfg.cache_entries);
    if (cfg.backend == "toy") return make_toy_backend(cache);
    if (cfg.backend.rfind("http://", 0) == 0 || cfg.backend.rfind("https://", 0) == 0) {
        return std::make_shared<FeatureBackend>(std::make_shared<RemoteDenoiserClient>(cfg.backend), cache);
    }
    throw ValidationError("backend must be 'toy' or an http(s) URL, got '" + cfg.backend + "'");
}

Session::Session(std::shared_ptr<FeatureBackend> backend, AppConfig config)
    : backend_(std::move(backend)),
      config_(std::move(config)),
      gate_(std::clamp(config_.service.max_inflight_extractions, 1, 1024)) {
    if (!backend_) throw ValidationError("session needs a backend");
}

std::string Session::add_image(const ImageRef& image) {
    std::unique_lock lock(mutex_);
    const std::string id = "img-" + std::to_string(next_id_++);
    std::vector<float> px(image.pixels().begin(), image.pixels().end());
    images_.emplace(id, std::make_shared<const ImageRef>(id, image.height(), image.width(), std::move(px)));
    return id;
}

std::shared_ptr<const ImageRef> Session::image(const std::string& id) const {
    std::shared_lock lock(mutex_);
    const auto it = images_.find(id);
    if (it == images_.end()) throw NotFoundError("unknown image id '" + id + "'");
    return it->second;
}

std::size_t Session::image_count() const {
    std::shared_lock lock(mutex_);
    return images_.size();
}

void Session::with_model(const std::function<void()>& fn) const {
    gate_.acquire();
    struct Release {
        std::counting_semaphore<1024>& gate;
        ~Release() { gate.release(); }
    } release{gate_};
    fn();
}

FeatureMap Session::extract(const ImageRef& image, const ExtractionConfig& cfg) const {
    FeatureMap out;
    with_model([&] { out = backend_->extract(image, cfg); });
    return out;
}

}  // namespace dift
