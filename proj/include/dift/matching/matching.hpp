#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dift/core/coords.hpp"
#include "dift/core/types.hpp"

namespace dift {

/// Similarities closer than this are ties; tie-breaks then pick by index.
inline constexpr double kSimilarityTieTolerance = 1e-12;

struct MatchResult {
    Point2D source_point;
    Point2D target_point;
    double similarity = 0.0;
};

/// Cosine similarity of a query against every cell of a target feature grid.
struct SimilarityMap {
    int height = 0;
    int width = 0;
    Dims target_dims;
    std::vector<double> values;  // row-major h x w
    int argmax_row = 0;
    int argmax_col = 0;

    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
    double max() const { return at(argmax_row, argmax_col); }
};

struct BestMatch {
    MatchResult match;
    SimilarityMap map;
};

/// Where the argmax is searched.
enum class MatchResolution {
    grid,   // native feature cells (default)
    pixel,  // every target pixel, features bilinearly upsampled
};

/// Bilinear feature lookup at a pixel location; positions past the outermost
/// cell centers clamp to the border cells.
std::vector<float> feature_at(const FeatureMap& features, Point2D p);

/// u.v / (|u||v|). Throws ValidationError on a zero-norm input or size mismatch.
double cosine_similarity(std::span<const float> u, std::span<const float> v);

/// Nearest target location of a source point under cosine similarity.
/// Ties go to the smallest row-major index.
BestMatch best_match(const FeatureMap& source, Point2D source_point, const FeatureMap& target,
                     MatchResolution resolution = MatchResolution::grid);

struct MutualMatch {
    std::size_t source_index = 0;
    std::size_t target_index = 0;
    double similarity = 0.0;

    bool operator==(const MutualMatch&) const = default;
};

/// Pairs (i, j) where j is i's best target keypoint and i is j's best source
/// keypoint. Sorted by source index.
std::vector<MutualMatch> mutual_nn_matches(const FeatureMap& source, const FeatureMap& target,
                                           std::span<const Point2D> source_keypoints,
                                           std::span<const Point2D> target_keypoints);

/// Same rule over precomputed descriptors (rows of equal length).
std::vector<MutualMatch> mutual_nn_matches(const std::vector<std::vector<float>>& source_descriptors,
                                           const std::vector<std::vector<float>>& target_descriptors);

/// Mean feature over the cells whose centers fall inside `region` (pixel
/// coordinates); the cell nearest the region center when none do.
std::vector<float> region_descriptor(const FeatureMap& features, const BoundingBox& region);

struct PatchHit {
    std::size_t gallery_index = 0;
    Point2D point;
    int row = 0;
    int col = 0;
    double similarity = 0.0;
};

/// Exhaustive top-k retrieval over every cell of every gallery map, ordered by
/// decreasing similarity (ties: gallery index, then row-major cell index).
/// With one_per_image, each gallery image contributes at most its best cell.
std::vector<PatchHit> topk_patches(std::span<const float> query, std::span<const FeatureMap> gallery, int k,
                                   bool one_per_image = true);

}  // namespace dift
