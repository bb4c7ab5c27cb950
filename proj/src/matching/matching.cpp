#include "dift/matching/matching.hpp"

#include <algorithm>
#include <cmath>

namespace dift {
namespace {

double cosine_from_parts(double dot, double norm_sq_a, double norm_sq_b) {
    return std::clamp(dot / (std::sqrt(norm_sq_a) * std::sqrt(norm_sq_b)), -1.0, 1.0);
}

// Strictly better than the incumbent by more than rounding noise.
bool beats(double candidate, double incumbent) { return candidate > incumbent + kSimilarityTieTolerance; }

double squared_norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return s;
}

// Similarity of `query` (squared norm q2) against one cell of a CHW grid.
// Zero-norm cells score 0.
double cell_similarity(const Tensor3<float>& grid, int row, int col, std::span<const float> query, double q2) {
    double dot = 0.0;
    double c2 = 0.0;
    for (int c = 0; c < grid.channels(); ++c) {
        const double v = grid(c, row, col);
        dot += static_cast<double>(query[c]) * v;
        c2 += v * v;
    }
    if (c2 == 0.0) return 0.0;
    return cosine_from_parts(dot, q2, c2);
}

double require_nonzero_query(std::span<const float> query, const char* what) {
    const double q2 = squared_norm(query);
    if (!(q2 > 0.0)) throw ValidationError(std::string(what) + " has zero norm (degenerate feature)");
    return q2;
}

}  // namespace

std::vector<float> feature_at(const FeatureMap& features, Point2D p) {
    require_point_in(p, features.source_dims(), "query point");
    const int h = features.height();
    const int w = features.width();
    const GridCoord g = pixel_to_grid(p, features.source_dims(), features.grid_dims());
    const double u = std::clamp(g.u, 0.0, static_cast<double>(w - 1));
    const double v = std::clamp(g.v, 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(v));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = u - x0;
    const double fy = v - y0;
    const double w00 = (1.0 - fx) * (1.0 - fy);
    const double w01 = fx * (1.0 - fy);
    const double w10 = (1.0 - fx) * fy;
    const double w11 = fx * fy;

    const auto& data = features.data();
    std::vector<float> out(static_cast<std::size_t>(features.channels()));
    for (int c = 0; c < features.channels(); ++c) {
        out[c] = static_cast<float>(w00 * data(c, y0, x0) + w01 * data(c, y0, x1) + w10 * data(c, y1, x0) +
                                    w11 * data(c, y1, x1));
    }
    return out;
}

double cosine_similarity(std::span<const float> u, std::span<const float> v) {
    if (u.size() != v.size()) throw ValidationError("cosine_similarity: vector lengths differ");
    double dot = 0.0;
    double nu = 0.0;
    double nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += static_cast<double>(u[i]) * v[i];
        nu += static_cast<double>(u[i]) * u[i];
        nv += static_cast<double>(v[i]) * v[i];
    }
    if (!(nu > 0.0) || !(nv > 0.0)) throw ValidationError("cosine_similarity: zero-norm vector");
    return cosine_from_parts(dot, nu, nv);
}

BestMatch best_match(const FeatureMap& source, Point2D source_point, const FeatureMap& target,
                     MatchResolution resolution) {
    if (source.channels() != target.channels()) throw ValidationError("feature maps have different channel counts");
    const std::vector<float> query = feature_at(source, source_point);
    const double q2 = require_nonzero_query(query, "query feature");

    BestMatch out;
    SimilarityMap& map = out.map;
    map.target_dims = target.source_dims();
    double best = -2.0;
    if (resolution == MatchResolution::grid) {
        map.height = target.height();
        map.width = target.width();
        map.values.resize(static_cast<std::size_t>(map.height) * map.width);
        for (int r = 0; r < map.height; ++r) {
            for (int c = 0; c < map.width; ++c) {
                const double s = cell_similarity(target.data(), r, c, query, q2);
                map.values[static_cast<std::size_t>(r) * map.width + c] = s;
                if (beats(s, best)) {
                    best = s;
                    map.argmax_row = r;
                    map.argmax_col = c;
                }
            }
        }
        out.match.target_point = cell_center_pixel(map.argmax_row, map.argmax_col, target.source_dims(),
                                                   target.grid_dims());
    } else {
        map.height = target.source_dims().height;
        map.width = target.source_dims().width;
        map.values.resize(static_cast<std::size_t>(map.height) * map.width);
        for (int r = 0; r < map.height; ++r) {
            for (int c = 0; c < map.width; ++c) {
                const auto f = feature_at(target, {static_cast<double>(c), static_cast<double>(r)});
                double dot = 0.0;
                for (std::size_t i = 0; i < f.size(); ++i) dot += static_cast<double>(query[i]) * f[i];
                const double f2 = squared_norm(f);
                const double s = f2 == 0.0 ? 0.0 : cosine_from_parts(dot, q2, f2);
                map.values[static_cast<std::size_t>(r) * map.width + c] = s;
                if (beats(s, best)) {
                    best = s;
                    map.argmax_row = r;
                    map.argmax_col = c;
                }
            }
        }
        out.match.target_point = {static_cast<double>(map.argmax_col), static_cast<double>(map.argmax_row)};
    }
    out.match.source_point = source_point;
    out.match.similarity = best;
    return out;
}

std::vector<MutualMatch> mutual_nn_matches(const std::vector<std::vector<float>>& source_descriptors,
                                           const std::vector<std::vector<float>>& target_descriptors) {
    const std::size_t n1 = source_descriptors.size();
    const std::size_t n2 = target_descriptors.size();
    if (n1 == 0 || n2 == 0) throw ValidationError("mutual_nn_matches: keypoint lists must be non-empty");

    std::vector<double> sim(n1 * n2);
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            sim[i * n2 + j] = cosine_similarity(source_descriptors[i], target_descriptors[j]);
        }
    }
    std::vector<std::size_t> row_best(n1, 0);
    std::vector<std::size_t> col_best(n2, 0);
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 1; j < n2; ++j) {
            if (beats(sim[i * n2 + j], sim[i * n2 + row_best[i]])) row_best[i] = j;
        }
    }
    for (std::size_t j = 0; j < n2; ++j) {
        for (std::size_t i = 1; i < n1; ++i) {
            if (beats(sim[i * n2 + j], sim[col_best[j] * n2 + j])) col_best[j] = i;
        }
    }
    std::vector<MutualMatch> out;
    for (std::size_t i = 0; i < n1; ++i) {
        const std::size_t j = row_best[i];
        if (col_best[j] == i) out.push_back({i, j, sim[i * n2 + j]});
    }
    return out;
}

std::vector<MutualMatch> mutual_nn_matches(const FeatureMap& source, const FeatureMap& target,
                                           std::span<const Point2D> source_keypoints,
                                           std::span<const Point2D> target_keypoints) {
    std::vector<std::vector<float>> d1;
    std::vector<std::vector<float>> d2;
    d1.reserve(source_keypoints.size());
    d2.reserve(target_keypoints.size());
    for (const auto& p : source_keypoints) d1.push_back(feature_at(source, p));
    for (const auto& p : target_keypoints) d2.push_back(feature_at(target, p));
    return mutual_nn_matches(d1, d2);
}

std::vector<float> region_descriptor(const FeatureMap& features, const BoundingBox& region) {
    const Dims src = features.source_dims();
    const Dims grid = features.grid_dims();
    std::vector<double> sum(static_cast<std::size_t>(features.channels()), 0.0);
    int count = 0;
    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
            const Point2D center = cell_center_pixel(r, c, src, grid);
            if (center.x < region.x_min || center.x > region.x_max || center.y < region.y_min ||
                center.y > region.y_max) {
                continue;
            }
            for (int k = 0; k < features.channels(); ++k) sum[k] += features.at(k, r, c);
            ++count;
        }
    }
    if (count == 0) {
        const Point2D mid{0.5 * (region.x_min + region.x_max), 0.5 * (region.y_min + region.y_max)};
        const GridCoord g = pixel_to_grid(mid, src, grid);
        const int c = std::clamp(static_cast<int>(std::lround(g.u)), 0, grid.width - 1);
        const int r = std::clamp(static_cast<int>(std::lround(g.v)), 0, grid.height - 1);
        return features.cell(r, c);
    }
    std::vector<float> out(sum.size());
    for (std::size_t k = 0; k < sum.size(); ++k) out[k] = static_cast<float>(sum[k] / count);
    return out;
}

std::vector<PatchHit> topk_patches(std::span<const float> query, std::span<const FeatureMap> gallery, int k,
                                   bool one_per_image) {
    if (k < 1) throw ValidationError("topk_patches: k must be at least 1");
    if (gallery.empty()) throw ValidationError("topk_patches: gallery is empty");
    const double q2 = require_nonzero_query(query, "query descriptor");

    std::vector<PatchHit> hits;
    for (std::size_t g = 0; g < gallery.size(); ++g) {
        const FeatureMap& fm = gallery[g];
        if (fm.channels() != static_cast<int>(query.size())) {
            throw ValidationError("topk_patches: gallery map channel count differs from the query");
        }
        PatchHit best_in_image;
        best_in_image.similarity = -2.0;
        for (int r = 0; r < fm.height(); ++r) {
            for (int c = 0; c < fm.width(); ++c) {
                PatchHit hit{g, cell_center_pixel(r, c, fm.source_dims(), fm.grid_dims()), r, c,
                             cell_similarity(fm.data(), r, c, query, q2)};
                if (one_per_image) {
                    if (beats(hit.similarity, best_in_image.similarity)) best_in_image = hit;
                } else {
                    hits.push_back(hit);
                }
            }
        }
        if (one_per_image) hits.push_back(best_in_image);
    }
    auto order = [](const PatchHit& a, const PatchHit& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        if (a.gallery_index != b.gallery_index) return a.gallery_index < b.gallery_index;
        if (a.row != b.row) return a.row < b.row;
        return a.col < b.col;
    };
    const std::size_t keep = std::min(hits.size(), static_cast<std::size_t>(k));
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), order);
    hits.resize(keep);
    return hits;
}

}  // namespace dift
