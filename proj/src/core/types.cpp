#include "dift/core/types.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "dift/core/random.hpp"

namespace dift {

void BoundingBox::validate(Dims image) const {
    if (!(std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) && std::isfinite(y_max))) {
        throw ValidationError("bounding box has non-finite coordinates");
    }
    if (!(x_min < x_max) || !(y_min < y_max)) {
        throw ValidationError("bounding box is degenerate");
    }
    if (x_min < 0.0 || y_min < 0.0 || x_max > image.width || y_max > image.height) {
        throw ValidationError("bounding box exceeds image bounds");
    }
}

ImageRef::ImageRef(std::string id, int height, int width, std::vector<float> pixels)
    : id_(std::move(id)), height_(height), width_(width), pixels_(std::move(pixels)) {
    if (height_ < 1 || width_ < 1) {
        throw ValidationError("image dimensions must be positive");
    }
    if (pixels_.size() != static_cast<std::size_t>(height_) * width_ * 3) {
        throw ValidationError("image pixel buffer does not match H x W x 3");
    }
    for (float v : pixels_) {
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
            throw ValidationError("image pixel values must be finite and in [0, 1]");
        }
    }
}

bool ImageRef::contains(Point2D p) const {
    return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 &&
           p.x <= width_ - 1 && p.y <= height_ - 1;
}

std::uint64_t ImageRef::content_digest() const {
    std::uint64_t h = derive_seed(static_cast<std::uint64_t>(height_), static_cast<std::uint64_t>(width_));
    for (float v : pixels_) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &v, sizeof bits);
        h = mix64(h ^ bits);
    }
    return h;
}

FeatureMap::FeatureMap(Tensor3<float> data, Dims source, std::string meta_json)
    : data_(std::move(data)), source_(source), meta_(std::move(meta_json)) {
    if (data_.size() == 0) {
        throw ValidationError("feature map is empty");
    }
    if (source_.height < 1 || source_.width < 1) {
        throw ValidationError("feature map source dims must be positive");
    }
    for (float v : data_.values()) {
        if (!std::isfinite(v)) {
            throw ValidationError("feature map contains a non-finite entry");
        }
    }
}

std::vector<float> FeatureMap::cell(int y, int x) const {
    std::vector<float> out(static_cast<std::size_t>(channels()));
    for (int c = 0; c < channels(); ++c) out[c] = data_(c, y, x);
    return out;
}

void require_point_in(Point2D p, Dims d, const char* what) {
    const bool ok = std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 &&
                    p.x <= d.width - 1 && p.y <= d.height - 1;
    if (!ok) {
        std::ostringstream msg;
        msg << what << " (" << p.x << ", " << p.y << ") lies outside a " << d.height << "x" << d.width
            << " image";
        throw ValidationError(msg.str());
    }
}

}  // namespace dift
