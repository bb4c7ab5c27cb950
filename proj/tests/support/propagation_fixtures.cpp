#include "propagation_fixtures.hpp"

#include <algorithm>
#include <cmath>

#include "dift/temporal/propagation.hpp"
#include "synthetic.hpp"

namespace dift::testing {
namespace {

double cosine(const FeatureMap& a, int ay, int ax, const FeatureMap& b, int by, int bx) {
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        dot += double(a.at(c, ay, ax)) * b.at(c, by, bx);
        na += double(a.at(c, ay, ax)) * a.at(c, ay, ax);
        nb += double(b.at(c, by, bx)) * b.at(c, by, bx);
    }
    return dot / std::sqrt(na * nb);
}

}  // namespace

std::vector<FeatureMap> rolling_frames(int frames, int height, int width, Dims source) {
    const FeatureMap base = orthogonal_cell_features(height, width, source);
    std::vector<FeatureMap> out;
    for (int k = 0; k < frames; ++k) {
        Tensor3<float> t(base.channels(), height, width);
        for (int c = 0; c < base.channels(); ++c) {
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) t(c, y, x) = base.at(c, y, (x + k) % width);
            }
        }
        out.emplace_back(std::move(t), source);
    }
    return out;
}

HardMask roll_mask(const HardMask& mask, int k) {
    HardMask out(mask.height(), mask.width());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) out.at(y, x) = mask.at(y, (x + k) % mask.width());
    }
    return out;
}

HardOracle hard_nn(const std::vector<FeatureMap>& frames, const HardMask& first, int radius, int context) {
    HardOracle o;
    o.masks.push_back(first);
    const int h = first.height();
    const int w = first.width();
    for (int k = 1; k < static_cast<int>(frames.size()); ++k) {
        std::vector<int> ctx = {0};
        for (int j = std::max(1, k - context); j < k; ++j) ctx.push_back(j);
        HardMask m(h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                std::vector<std::pair<double, int>> cand;
                for (int j : ctx) {
                    for (int yy = std::max(0, y - radius); yy <= std::min(h - 1, y + radius); ++yy) {
                        for (int xx = std::max(0, x - radius); xx <= std::min(w - 1, x + radius); ++xx) {
                            cand.push_back({cosine(frames[k], y, x, frames[j], yy, xx), o.masks[j].at(yy, xx)});
                        }
                    }
                }
                std::sort(cand.begin(), cand.end(), [](auto& a, auto& b) { return a.first > b.first; });
                m.at(y, x) = cand[0].second;
                for (const auto& c : cand) {
                    if (c.second != cand[0].second) {
                        o.min_label_gap = std::min(o.min_label_gap, cand[0].first - c.first);
                        break;
                    }
                }
            }
        }
        o.masks.push_back(m);
    }
    return o;
}

std::vector<FeatureMap> copied_frames(int n, int side, int radius, int context, std::mt19937_64& rng) {
    std::vector<FeatureMap> frames;
    frames.push_back(random_features(64, side, side, rng));
    std::normal_distribution<double> noise(0.0, 0.1);
    std::uniform_int_distribution<int> offset(-radius, radius);
    for (int k = 1; k < n; ++k) {
        const auto ctx = context_indices(k, context);
        std::uniform_int_distribution<std::size_t> pick(0, ctx.size() - 1);
        Tensor3<float> t(64, side, side);
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                const FeatureMap& src = frames[static_cast<std::size_t>(ctx[pick(rng)])];
                const int sy = std::clamp(y + offset(rng), 0, side - 1);
                const int sx = std::clamp(x + offset(rng), 0, side - 1);
                for (int c = 0; c < 64; ++c) t(c, y, x) = static_cast<float>(src.at(c, sy, sx) + noise(rng));
            }
        }
        frames.emplace_back(std::move(t), Dims{side, side});
    }
    return frames;
}

}  // namespace dift::testing
