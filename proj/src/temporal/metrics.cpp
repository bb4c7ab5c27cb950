#include "dift/temporal/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dift/core/errors.hpp"

namespace dift {
namespace {

void require_same_dims(const HardMask& a, const HardMask& b) {
    if (a.dims() != b.dims()) throw ValidationError("masks differ in dims");
}

// Marks every pixel within Euclidean distance r of a set pixel.
std::vector<bool> dilate_disk(const std::vector<bool>& set, Dims d, double r) {
    const int ri = static_cast<int>(std::floor(r));
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -ri; dy <= ri; ++dy) {
        for (int dx = -ri; dx <= ri; ++dx) {
            if (dx * dx + dy * dy <= r * r) offsets.emplace_back(dy, dx);
        }
    }
    std::vector<bool> out(set.size(), false);
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
            if (!set[static_cast<std::size_t>(y) * d.width + x]) continue;
            for (const auto& [dy, dx] : offsets) {
                const int yy = y + dy;
                const int xx = x + dx;
                if (yy >= 0 && yy < d.height && xx >= 0 && xx < d.width) {
                    out[static_cast<std::size_t>(yy) * d.width + xx] = true;
                }
            }
        }
    }
    return out;
}

std::size_t count_hits(const std::vector<bool>& a, const std::vector<bool>& b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) n += (a[i] && b[i]) ? 1 : 0;
    return n;
}

}  // namespace

double jaccard_J(const HardMask& pred, const HardMask& gt, int object_id) {
    require_same_dims(pred, gt);
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < pred.labels().size(); ++i) {
        const bool p = pred.labels()[i] == object_id;
        const bool g = gt.labels()[i] == object_id;
        inter += (p && g) ? 1 : 0;
        uni += (p || g) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<bool> object_boundary(const HardMask& mask, int object_id) {
    const int h = mask.height();
    const int w = mask.width();
    std::vector<bool> out(static_cast<std::size_t>(h) * w, false);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.at(y, x) != object_id) continue;
            const bool edge = (y > 0 && mask.at(y - 1, x) != object_id) || (y + 1 < h && mask.at(y + 1, x) != object_id) ||
                              (x > 0 && mask.at(y, x - 1) != object_id) || (x + 1 < w && mask.at(y, x + 1) != object_id);
            out[static_cast<std::size_t>(y) * w + x] = edge;
        }
    }
    return out;
}

double contour_F(const HardMask& pred, const HardMask& gt, int object_id, double tolerance_px) {
    require_same_dims(pred, gt);
    if (!(tolerance_px >= 0.0)) throw ValidationError("contour tolerance must be non-negative");
    const auto bp = object_boundary(pred, object_id);
    const auto bg = object_boundary(gt, object_id);
    const auto np = static_cast<std::size_t>(std::count(bp.begin(), bp.end(), true));
    const auto ng = static_cast<std::size_t>(std::count(bg.begin(), bg.end(), true));
    if (np == 0 && ng == 0) return 1.0;
    if (np == 0 || ng == 0) return 0.0;
    const double precision =
        static_cast<double>(count_hits(bp, dilate_disk(bg, gt.dims(), tolerance_px))) / static_cast<double>(np);
    const double recall =
        static_cast<double>(count_hits(bg, dilate_disk(bp, pred.dims(), tolerance_px))) / static_cast<double>(ng);
    return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

double default_contour_tolerance(Dims image) {
    return std::ceil(0.008 * std::hypot(static_cast<double>(image.height), static_cast<double>(image.width)));
}

KeypointPck keypoint_pck(std::span<const Point2D> predicted, std::span<const Point2D> truth, double norm_height,
                         double norm_width, double alpha) {
    if (predicted.size() != truth.size()) throw ValidationError("keypoint lists differ in length");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
    const double threshold = alpha * std::max(norm_height, norm_width);
    KeypointPck out;
    out.total = predicted.size();
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (std::hypot(predicted[i].x - truth[i].x, predicted[i].y - truth[i].y) <= threshold) ++out.correct;
    }
    return out;
}

BoundingBox points_bbox(std::span<const Point2D> points) {
    if (points.empty()) throw ValidationError("points_bbox of an empty set");
    BoundingBox b{points[0].x, points[0].y, points[0].x, points[0].y};
    for (const auto& p : points) {
        b.x_min = std::min(b.x_min, p.x);
        b.y_min = std::min(b.y_min, p.y);
        b.x_max = std::max(b.x_max, p.x);
        b.y_max = std::max(b.y_max, p.y);
    }
    return b;
}

}  // namespace dift
