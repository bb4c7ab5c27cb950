#include "dift/temporal/label_mask.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dift/core/coords.hpp"
#include "dift/core/errors.hpp"

namespace dift {

HardMask::HardMask(int height, int width, int fill)
    : HardMask(height, width,
               std::vector<int>(height > 0 && width > 0 ? static_cast<std::size_t>(height) * width : 0, fill)) {}

HardMask::HardMask(int height, int width, std::vector<int> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
    if (height < 1 || width < 1) throw ValidationError("mask dimensions must be positive");
    if (labels_.size() != static_cast<std::size_t>(height) * width) {
        throw ValidationError("mask label count does not match its dims");
    }
    for (int v : labels_) {
        if (v < 0) throw ValidationError("mask labels must be non-negative");
    }
}

int HardMask::max_label() const { return labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end()); }

LabelMask::LabelMask(Tensor3<double> probs) : probs_(std::move(probs)) {
    const std::size_t plane = probs_.plane_size();
    const auto v = probs_.values();
    for (std::size_t p = 0; p < plane; ++p) {
        double sum = 0.0;
        for (int l = 0; l < probs_.channels(); ++l) {
            const double x = v[static_cast<std::size_t>(l) * plane + p];
            if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("label probabilities must be finite and >= 0");
            sum += x;
        }
        if (std::abs(sum - 1.0) > kLabelSumTolerance) {
            throw ValidationError("label probabilities at pixel " + std::to_string(p) + " sum to " + std::to_string(sum));
        }
    }
}

LabelMask LabelMask::one_hot(const HardMask& hard, int num_labels) {
    if (num_labels < 1) throw ValidationError("num_labels must be positive");
    Tensor3<double> t(num_labels, hard.height(), hard.width(), 0.0);
    for (int y = 0; y < hard.height(); ++y) {
        for (int x = 0; x < hard.width(); ++x) {
            const int l = hard.at(y, x);
            if (l >= num_labels) throw ValidationError("label " + std::to_string(l) + " exceeds num_labels");
            t(l, y, x) = 1.0;
        }
    }
    return LabelMask(std::move(t));
}

HardMask LabelMask::hard() const {
    HardMask out(height(), width());
    for (int y = 0; y < height(); ++y) {
        for (int x = 0; x < width(); ++x) {
            int best = 0;
            for (int l = 1; l < num_labels(); ++l) {
                if (probs_(l, y, x) > probs_(best, y, x)) best = l;
            }
            out.at(y, x) = best;
        }
    }
    return out;
}

HardMask downsample_nearest(const HardMask& mask, Dims out) {
    if (out.height < 1 || out.width < 1) throw ValidationError("output dims must be positive");
    HardMask result(out.height, out.width);
    for (int i = 0; i < out.height; ++i) {
        const int y = std::min(mask.height() - 1,
                               static_cast<int>(std::floor((i + 0.5) * mask.height() / out.height)));
        for (int j = 0; j < out.width; ++j) {
            const int x = std::min(mask.width() - 1,
                                   static_cast<int>(std::floor((j + 0.5) * mask.width() / out.width)));
            result.at(i, j) = mask.at(y, x);
        }
    }
    return result;
}

LabelMask upsample_bilinear(const LabelMask& mask, Dims out) {
    if (out.height < 1 || out.width < 1) throw ValidationError("output dims must be positive");
    const Dims grid = mask.dims();
    Tensor3<double> t(mask.num_labels(), out.height, out.width, 0.0);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const GridCoord g = pixel_to_grid({static_cast<double>(x), static_cast<double>(y)}, out, grid);
            const double u = std::clamp(g.u, 0.0, static_cast<double>(grid.width - 1));
            const double v = std::clamp(g.v, 0.0, static_cast<double>(grid.height - 1));
            const int c0 = static_cast<int>(std::floor(u));
            const int r0 = static_cast<int>(std::floor(v));
            const int c1 = std::min(c0 + 1, grid.width - 1);
            const int r1 = std::min(r0 + 1, grid.height - 1);
            const double fu = u - c0;
            const double fv = v - r0;
            for (int l = 0; l < mask.num_labels(); ++l) {
                t(l, y, x) = (1 - fv) * ((1 - fu) * mask.at(l, r0, c0) + fu * mask.at(l, r0, c1)) +
                             fv * ((1 - fu) * mask.at(l, r1, c0) + fu * mask.at(l, r1, c1));
            }
        }
    }
    return LabelMask(std::move(t));
}

}  // namespace dift
