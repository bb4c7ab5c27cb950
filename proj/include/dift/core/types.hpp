#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dift/core/tensor.hpp"

namespace dift {

/// Pixel-space location. x is the column axis, y the row axis; (0, 0) is the
/// center of the top-left pixel.
struct Point2D {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point2D&) const = default;
};

/// Integer extent of an image or grid, always (height, width).
struct Dims {
    int height = 0;
    int width = 0;

    bool operator==(const Dims&) const = default;
};

struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }

    /// Throws ValidationError unless the box is non-degenerate and lies inside
    /// an image of the given dims.
    void validate(Dims image) const;
};

/// An RGB image with values in [0, 1], stored row-major interleaved (H x W x 3).
class ImageRef {
public:
    ImageRef() = default;
    ImageRef(std::string id, int height, int width, std::vector<float> pixels);

    const std::string& id() const { return id_; }
    int height() const { return height_; }
    int width() const { return width_; }
    Dims dims() const { return {height_, width_}; }

    float at(int y, int x, int c) const {
        return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
    }
    std::span<const float> pixels() const { return pixels_; }

    /// True when 0 <= x <= W-1 and 0 <= y <= H-1.
    bool contains(Point2D p) const;

    /// 64-bit digest of the pixel content, stable across runs.
    std::uint64_t content_digest() const;

private:
    std::string id_;
    int height_ = 0;
    int width_ = 0;
    std::vector<float> pixels_;
};

/// Dense descriptor grid (C x h x w) describing an image of source dims (H, W).
/// The grid resolution is independent of the source resolution.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(Tensor3<float> data, Dims source, std::string meta_json = "{}");

    int channels() const { return data_.channels(); }
    int height() const { return data_.height(); }
    int width() const { return data_.width(); }
    Dims grid_dims() const { return {data_.height(), data_.width()}; }
    Dims source_dims() const { return source_; }
    const Tensor3<float>& data() const { return data_; }
    const std::string& meta_json() const { return meta_; }

    float at(int c, int y, int x) const { return data_(c, y, x); }
    /// Channel vector of one grid cell.
    std::vector<float> cell(int y, int x) const;

    bool operator==(const FeatureMap&) const = default;

private:
    Tensor3<float> data_;
    Dims source_;
    std::string meta_;
};

/// Throws ValidationError unless p is a valid pixel location in an image of dims d.
void require_point_in(Point2D p, Dims d, const char* what = "point");

}  // namespace dift
