#pragma once

#include <vector>

#include "dift/core/tensor.hpp"
#include "dift/core/types.hpp"

namespace dift {

/// Integer label per pixel (0 = background), row-major.
class HardMask {
public:
    HardMask() = default;
    HardMask(int height, int width, int fill = 0);
    HardMask(int height, int width, std::vector<int> labels);

    int height() const { return height_; }
    int width() const { return width_; }
    Dims dims() const { return {height_, width_}; }
    int at(int y, int x) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
    int& at(int y, int x) { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
    const std::vector<int>& labels() const { return labels_; }
    int max_label() const;

    bool operator==(const HardMask&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<int> labels_;
};

/// Per-pixel distribution over L labels (L x h x w). Every pixel is
/// non-negative and sums to 1 within kLabelSumTolerance.
class LabelMask {
public:
    static constexpr double kLabelSumTolerance = 1e-6;

    LabelMask() = default;
    explicit LabelMask(Tensor3<double> probs);

    /// One-hot encoding of a hard mask; labels must lie in [0, num_labels).
    static LabelMask one_hot(const HardMask& hard, int num_labels);

    int num_labels() const { return probs_.channels(); }
    int height() const { return probs_.height(); }
    int width() const { return probs_.width(); }
    Dims dims() const { return {probs_.height(), probs_.width()}; }
    const Tensor3<double>& probs() const { return probs_; }
    double at(int label, int y, int x) const { return probs_(label, y, x); }

    /// Per-pixel argmax; ties go to the smaller label.
    HardMask hard() const;

private:
    Tensor3<double> probs_;
};

/// Nearest-neighbour resampling: output pixel (i, j) copies the input pixel
/// under its center.
HardMask downsample_nearest(const HardMask& mask, Dims out);

/// Bilinear resampling of the label distributions with pixel-center
/// alignment, clamped at the border.
LabelMask upsample_bilinear(const LabelMask& mask, Dims out);

}  // namespace dift
