#include "dift/edit/edit_prop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dift/core/errors.hpp"

namespace dift {

void RgbaImage::validate() const {
    if (height < 1 || width < 1) throw ValidationError("RGBA image dims must be positive");
    if (pixels.size() != static_cast<std::size_t>(height) * width * 4) {
        throw ValidationError("RGBA pixel buffer does not match its dims");
    }
    for (float v : pixels) {
        if (!(v >= 0.0f && v <= 1.0f)) throw ValidationError("RGBA values must lie in [0, 1]");
    }
}

void EditLayer::validate(Dims source) const {
    rgba.validate();
    if (rgba.dims() != source) throw ValidationError("edit layer dims differ from the source image");
    if (region.dims() != source) throw ValidationError("edit region dims differ from the source image");
    for (int y = 0; y < source.height; ++y) {
        for (int x = 0; x < source.width; ++x) {
            if (region.at(y, x) == 0 && rgba.at(y, x, 3) != 0.0f) {
                throw ValidationError("edit alpha is nonzero outside the region mask");
            }
        }
    }
}

namespace {

struct RegionBox {
    int x0 = std::numeric_limits<int>::max();
    int y0 = std::numeric_limits<int>::max();
    int x1 = -1;
    int y1 = -1;
    std::size_t pixels = 0;
};

RegionBox region_box(const HardMask& region) {
    RegionBox b;
    for (int y = 0; y < region.height(); ++y) {
        for (int x = 0; x < region.width(); ++x) {
            if (region.at(y, x) == 0) continue;
            b.x0 = std::min(b.x0, x);
            b.y0 = std::min(b.y0, y);
            b.x1 = std::max(b.x1, x);
            b.y1 = std::max(b.y1, y);
            ++b.pixels;
        }
    }
    return b;
}

std::vector<Point2D> stratified(const HardMask& region, const RegionBox& b, int g) {
    const int bw = b.x1 - b.x0 + 1;
    const int bh = b.y1 - b.y0 + 1;
    const std::size_t strata = static_cast<std::size_t>(g) * g;
    std::vector<double> best_dist(strata, std::numeric_limits<double>::infinity());
    std::vector<Point2D> best(strata);
    for (int y = b.y0; y <= b.y1; ++y) {
        for (int x = b.x0; x <= b.x1; ++x) {
            if (region.at(y, x) == 0) continue;
            const int si = static_cast<int>(static_cast<long long>(y - b.y0) * g / bh);
            const int sj = static_cast<int>(static_cast<long long>(x - b.x0) * g / bw);
            const double cy = b.y0 + (si + 0.5) * bh / g - 0.5;
            const double cx = b.x0 + (sj + 0.5) * bw / g - 0.5;
            const double d = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            const std::size_t s = static_cast<std::size_t>(si) * g + sj;
            if (d < best_dist[s]) {
                best_dist[s] = d;
                best[s] = {static_cast<double>(x), static_cast<double>(y)};
            }
        }
    }
    std::vector<Point2D> out;
    for (std::size_t s = 0; s < strata; ++s) {
        if (std::isfinite(best_dist[s])) out.push_back(best[s]);
    }
    return out;
}

}  // namespace

std::vector<Point2D> sample_region_points(const HardMask& region, int n) {
    if (n < 4) throw ValidationError("sample_region_points needs n >= 4");
    const RegionBox b = region_box(region);
    if (b.pixels < 4) throw ValidationError("edit region has fewer than 4 pixels");

    const int g_max = std::max(b.x1 - b.x0 + 1, b.y1 - b.y0 + 1);
    int g = std::min(g_max, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
    std::vector<Point2D> pts = stratified(region, b, g);
    while (static_cast<int>(pts.size()) < n && g < g_max) {
        g = std::min(g_max, g * 2);
        pts = stratified(region, b, g);
    }
    if (pts.size() < 4) throw ValidationError("edit region yields fewer than 4 sample points");
    if (static_cast<int>(pts.size()) > n) {
        std::vector<Point2D> thinned;
        for (int k = 0; k < n; ++k) thinned.push_back(pts[static_cast<std::size_t>(k) * pts.size() / n]);
        pts = std::move(thinned);
    }
    return pts;
}

RgbaImage warp_premultiplied(const RgbaImage& layer, const Homography& source_to_target, Dims target) {
    layer.validate();
    if (target.height < 1 || target.width < 1) throw ValidationError("target dims must be positive");
    const Homography back = source_to_target.inverse();
    RgbaImage out{target.height, target.width, std::vector<float>(static_cast<std::size_t>(target.height) * target.width * 4, 0.0f)};
    for (int y = 0; y < target.height; ++y) {
        for (int x = 0; x < target.width; ++x) {
            const double w = back(2, 0) * x + back(2, 1) * y + back(2, 2);
            if (std::abs(w) < 1e-12) continue;
            const double sx = (back(0, 0) * x + back(0, 1) * y + back(0, 2)) / w;
            const double sy = (back(1, 0) * x + back(1, 1) * y + back(1, 2)) / w;
            if (!(sx > -1.0 && sy > -1.0 && sx < layer.width && sy < layer.height)) continue;
            const int c0 = static_cast<int>(std::floor(sx));
            const int r0 = static_cast<int>(std::floor(sy));
            const double fx = sx - c0;
            const double fy = sy - r0;
            double acc[4] = {0, 0, 0, 0};
            const int rows[2] = {r0, r0 + 1};
            const int cols[2] = {c0, c0 + 1};
            const double wy[2] = {1 - fy, fy};
            const double wx[2] = {1 - fx, fx};
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    const int r = rows[a];
                    const int c = cols[b];
                    if (r < 0 || r >= layer.height || c < 0 || c >= layer.width) continue;
                    const double wt = wy[a] * wx[b];
                    if (wt == 0.0) continue;
                    const double alpha = layer.at(r, c, 3);
                    for (int k = 0; k < 3; ++k) acc[k] += wt * alpha * layer.at(r, c, k);
                    acc[3] += wt * alpha;
                }
            }
            for (int k = 0; k < 4; ++k) out.at(y, x, k) = static_cast<float>(std::clamp(acc[k], 0.0, 1.0));
        }
    }
    return out;
}

ImageRef composite_over(const ImageRef& target, const RgbaImage& premultiplied) {
    if (premultiplied.dims() != target.dims()) throw ValidationError("layer and target dims differ");
    std::vector<float> px(target.pixels().begin(), target.pixels().end());
    for (int y = 0; y < target.height(); ++y) {
        for (int x = 0; x < target.width(); ++x) {
            const float a = premultiplied.at(y, x, 3);
            if (a == 0.0f) continue;
            for (int c = 0; c < 3; ++c) {
                const double v = premultiplied.at(y, x, c) + (1.0 - a) * target.at(y, x, c);
                px[(static_cast<std::size_t>(y) * target.width() + x) * 3 + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return ImageRef(target.id() + "+edit", target.height(), target.width(), std::move(px));
}

EditResult propagate_edit(const ImageRef& source, const EditLayer& edit, const ImageRef& target,
                          const FeatureBackend& backend, const ExtractionConfig& cfg, const EditConfig& options) {
    edit.validate(source.dims());
    if (!(options.drop_quantile >= 0.0 && options.drop_quantile < 1.0)) {
        throw ValidationError("drop_quantile must lie in [0, 1)");
    }
    const auto points = sample_region_points(edit.region, options.n_points);
    const FeatureMap fs = backend.extract(source, cfg);
    const FeatureMap ft = backend.extract(target, cfg);

    EditDiagnostics diag;
    for (const auto& p : points) diag.matches.push_back(best_match(fs, p, ft, options.resolution).match);

    std::vector<double> sims;
    for (const auto& m : diag.matches) sims.push_back(m.similarity);
    std::sort(sims.begin(), sims.end());
    diag.similarity_floor =
        sims[static_cast<std::size_t>(std::floor(options.drop_quantile * static_cast<double>(sims.size() - 1)))];

    std::vector<Correspondence> kept;
    for (const auto& m : diag.matches) {
        const bool keep = m.similarity >= diag.similarity_floor;
        diag.kept.push_back(keep);
        if (keep) kept.push_back({m.source_point, m.target_point});
    }
    diag.inliers.assign(diag.matches.size(), false);

    HomographyEstimate est;
    try {
        est = estimate_homography(kept, options.ransac);
    } catch (const EstimationError& e) {
        throw EditPropagationError(std::string("edit propagation failed: ") + e.what(), std::move(diag));
    }
    for (std::size_t i = 0, k = 0; i < diag.matches.size(); ++i) {
        if (diag.kept[i]) diag.inliers[i] = est.inliers[k++];
    }

    EditResult result;
    result.homography = est.homography;
    result.composite = composite_over(target, warp_premultiplied(edit.rgba, est.homography, target.dims()));
    result.diagnostics = std::move(diag);
    return result;
}

}  // namespace dift
