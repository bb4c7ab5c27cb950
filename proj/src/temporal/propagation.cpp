#include "dift/temporal/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dift/core/coords.hpp"
#include "dift/core/errors.hpp"
#include "dift/core/parallel.hpp"

namespace dift {

void PropagationConfig::validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ValidationError("temperature must be positive");
    if (radius < 1) throw ValidationError("radius must be a positive number of cells");
    if (top_k < 1) throw ValidationError("top_k must be positive");
    if (context_frames < 0) throw ValidationError("context_frames must be non-negative");
}

std::vector<int> context_indices(int frame, int context_frames) {
    std::vector<int> out{0};
    for (int k = std::max(1, frame - context_frames); k < frame; ++k) out.push_back(k);
    return out;
}

namespace {

// Unit-norm cell descriptors, cell-major (h*w rows of C); zero cells stay zero.
std::vector<double> normalized_cells(const FeatureMap& f) {
    const int c = f.channels();
    const std::size_t cells = static_cast<std::size_t>(f.height()) * f.width();
    std::vector<double> out(cells * c);
    for (int y = 0; y < f.height(); ++y) {
        for (int x = 0; x < f.width(); ++x) {
            const std::size_t cell = static_cast<std::size_t>(y) * f.width() + x;
            double norm = 0.0;
            for (int k = 0; k < c; ++k) {
                const double v = f.at(k, y, x);
                out[cell * c + k] = v;
                norm += v * v;
            }
            norm = std::sqrt(norm);
            for (int k = 0; k < c; ++k) out[cell * c + k] = norm > 0.0 ? out[cell * c + k] / norm : 0.0;
        }
    }
    return out;
}

struct Candidate {
    double similarity;
    int context;  // position in the context list
    int cell;     // row-major cell index
};

}  // namespace

std::vector<LabelMask> propagate_labels(std::span<const FeatureMap> frames, const LabelMask& first_mask,
                                        const PropagationConfig& cfg, unsigned threads) {
    cfg.validate();
    if (frames.empty()) throw ValidationError("propagate_labels needs at least one frame");
    const Dims grid = frames[0].grid_dims();
    const int channels = frames[0].channels();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].grid_dims() != grid || frames[i].channels() != channels) {
            throw ValidationError("frame " + std::to_string(i) + " features differ in shape from frame 0");
        }
    }
    if (first_mask.dims() != grid) {
        throw ValidationError("first mask is " + std::to_string(first_mask.height()) + "x" +
                              std::to_string(first_mask.width()) + " but the feature grid is " +
                              std::to_string(grid.height) + "x" + std::to_string(grid.width));
    }

    const int labels = first_mask.num_labels();
    const std::size_t plane = static_cast<std::size_t>(grid.height) * grid.width;
    std::vector<std::vector<double>> unit(frames.size());
    parallel_for(frames.size(), [&](std::size_t i) { unit[i] = normalized_cells(frames[i]); }, threads);

    std::vector<LabelMask> out;
    out.reserve(frames.size());
    out.push_back(first_mask);
    for (int k = 1; k < static_cast<int>(frames.size()); ++k) {
        const std::vector<int> context = context_indices(k, cfg.context_frames);
        const auto& query = unit[static_cast<std::size_t>(k)];
        Tensor3<double> probs(labels, grid.height, grid.width, 0.0);
        auto pv = probs.values();
        parallel_for(
            static_cast<std::size_t>(grid.height),
            [&](std::size_t row) {
                const int y = static_cast<int>(row);
                std::vector<Candidate> cand;
                for (int x = 0; x < grid.width; ++x) {
                    cand.clear();
                    const double* q = &query[(static_cast<std::size_t>(y) * grid.width + x) * channels];
                    const int y0 = std::max(0, y - cfg.radius);
                    const int y1 = std::min(grid.height - 1, y + cfg.radius);
                    const int x0 = std::max(0, x - cfg.radius);
                    const int x1 = std::min(grid.width - 1, x + cfg.radius);
                    for (int ci = 0; ci < static_cast<int>(context.size()); ++ci) {
                        const auto& ref = unit[static_cast<std::size_t>(context[static_cast<std::size_t>(ci)])];
                        for (int yy = y0; yy <= y1; ++yy) {
                            for (int xx = x0; xx <= x1; ++xx) {
                                const int cell = yy * grid.width + xx;
                                const double* r = &ref[static_cast<std::size_t>(cell) * channels];
                                double dot = 0.0;
                                for (int c = 0; c < channels; ++c) dot += q[c] * r[c];
                                cand.push_back({std::clamp(dot, -1.0, 1.0), ci, cell});
                            }
                        }
                    }
                    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), cand.size());
                    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                                      [](const Candidate& a, const Candidate& b) {
                                          if (a.similarity != b.similarity) return a.similarity > b.similarity;
                                          if (a.context != b.context) return a.context < b.context;
                                          return a.cell < b.cell;
                                      });
                    const double top = cand.front().similarity;
                    std::vector<double> mix(static_cast<std::size_t>(labels), 0.0);
                    for (std::size_t i = 0; i < keep; ++i) {
                        const double w = std::exp((cand[i].similarity - top) / cfg.temperature);
                        const auto ctx = static_cast<std::size_t>(context[static_cast<std::size_t>(cand[i].context)]);
                        const auto sv = out[ctx].probs().values();
                        for (int l = 0; l < labels; ++l) {
                            mix[static_cast<std::size_t>(l)] +=
                                w * sv[static_cast<std::size_t>(l) * plane + static_cast<std::size_t>(cand[i].cell)];
                        }
                    }
                    double sum = 0.0;
                    for (double m : mix) sum += m;
                    const std::size_t cell = static_cast<std::size_t>(y) * grid.width + x;
                    for (int l = 0; l < labels; ++l) {
                        pv[static_cast<std::size_t>(l) * plane + cell] = mix[static_cast<std::size_t>(l)] / sum;
                    }
                }
            },
            threads);
        out.emplace_back(std::move(probs));
    }
    return out;
}

KeypointTrack track_keypoints(std::span<const FeatureMap> frames, std::span<const Point2D> first_keypoints,
                              const PropagationConfig& cfg, unsigned threads) {
    if (frames.empty()) throw ValidationError("track_keypoints needs at least one frame");
    if (first_keypoints.empty()) throw ValidationError("track_keypoints needs at least one keypoint");
    const Dims grid = frames[0].grid_dims();
    const Dims source = frames[0].source_dims();
    const int k = static_cast<int>(first_keypoints.size());

    std::vector<std::vector<int>> owners(static_cast<std::size_t>(grid.height) * grid.width);
    for (int i = 0; i < k; ++i) {
        const Point2D p = first_keypoints[static_cast<std::size_t>(i)];
        require_point_in(p, source, "keypoint");
        const GridCoord g = pixel_to_grid(p, source, grid);
        const int col = std::clamp(static_cast<int>(std::lround(g.u)), 0, grid.width - 1);
        const int row = std::clamp(static_cast<int>(std::lround(g.v)), 0, grid.height - 1);
        owners[static_cast<std::size_t>(row) * grid.width + col].push_back(i);
    }
    Tensor3<double> probs(k + 1, grid.height, grid.width, 0.0);
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            const auto& o = owners[static_cast<std::size_t>(y) * grid.width + x];
            if (o.empty()) {
                probs(0, y, x) = 1.0;
            } else {
                for (int i : o) probs(i + 1, y, x) = 1.0 / static_cast<double>(o.size());
            }
        }
    }
    const auto masks = propagate_labels(frames, LabelMask(std::move(probs)), cfg, threads);

    KeypointTrack track;
    track.frames.emplace_back(first_keypoints.begin(), first_keypoints.end());
    for (std::size_t f = 1; f < masks.size(); ++f) {
        std::vector<Point2D> pts;
        for (int i = 0; i < k; ++i) {
            int best_row = 0;
            int best_col = 0;
            for (int y = 0; y < grid.height; ++y) {
                for (int x = 0; x < grid.width; ++x) {
                    if (masks[f].at(i + 1, y, x) > masks[f].at(i + 1, best_row, best_col)) {
                        best_row = y;
                        best_col = x;
                    }
                }
            }
            pts.push_back(cell_center_pixel(best_row, best_col, source, grid));
        }
        track.frames.push_back(std::move(pts));
    }
    return track;
}

}  // namespace dift
