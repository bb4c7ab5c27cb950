#pragma once

#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dift/diffusion/backend.hpp"
#include "dift/matching/matching.hpp"
#include "dift/semantic/pck.hpp"

namespace dift {

struct KeypointCorrespondence {
    Point2D source;
    Point2D target;
    bool visible = true;
};

/// One annotated source/target pair.
struct KeypointPair {
    std::string id;
    std::string source_image;
    std::string target_image;
    std::string category;
    std::vector<KeypointCorrespondence> keypoints;
    std::optional<BoundingBox> target_bbox;
};

// Pair manifest: JSON lines, one object per pair:
//   {"id": "...", "source_image": "a.png", "target_image": "b.png", "category": "cat",
//    "keypoints": [{"source": [x, y], "target": [x, y], "visible": true}, ...],
//    "target_bbox": [x_min, y_min, x_max, y_max]}
// "id" defaults to the 1-based line number; "visible" defaults to true;
// "target_bbox" is required only for bbox normalization.
std::vector<KeypointPair> parse_pair_manifest(std::istream& in);

struct SemanticEvalOptions {
    double alpha = 0.1;
    PckNorm norm = PckNorm::bbox;
    PckAggregation aggregation = PckAggregation::per_image;
    MatchResolution resolution = MatchResolution::grid;
    unsigned threads = 0;
};

struct SemanticEvaluation {
    PckReport report;
    std::vector<PairResult> pairs;  // evaluated pairs, in input order
};

/// Transfers every visible source keypoint into the target by best_match and
/// scores it with PCK. cfg.prompt is a template: "[class]" is replaced by the
/// pair's category. Pairs whose extraction fails with a BackendError are
/// skipped and listed in the report.
SemanticEvaluation evaluate_dataset(const FeatureBackend& backend, std::span<const KeypointPair> dataset,
                                    const ImageProvider& images, const ExtractionConfig& cfg,
                                    const SemanticEvalOptions& options);

struct GridSearchCell {
    int t = 0;
    int block_index = 0;
    std::optional<double> score;  // empty when the cell failed
    std::string error;
};

struct GridSearchResult {
    int best_t = 0;
    int best_block = 0;
    double best_score = 0.0;
    std::vector<GridSearchCell> cells;  // t-major, both axes ascending
};

/// Scores every (t, block) combination on the tuning set and returns the best
/// overall PCK (ties: smaller t, then smaller block) with the full grid.
/// A failing cell is recorded and skipped; all cells failing is an error.
GridSearchResult grid_search(const FeatureBackend& backend, std::span<const KeypointPair> tuning_set,
                             const ImageProvider& images, const ExtractionConfig& base_cfg,
                             std::span<const int> t_candidates, std::span<const int> block_candidates,
                             const SemanticEvalOptions& options);

/// Default time-step candidates; bracket every published optimum.
inline constexpr int kDefaultTimeStepGrid[] = {0, 26, 51, 101, 161, 261, 421, 601, 801};

// CUB protocol: images grouped into splits; every ordered pair within a split
// is evaluated on the keypoints visible in both images; per-point PCK at
// alpha_img per split, then the mean over splits.
struct CubImage {
    std::string image;
    int split = 0;
    std::string category;
    std::vector<std::optional<Point2D>> keypoints;  // empty optional = not visible
};

// CUB manifest: JSON lines {"image": "x.png", "split": 0, "category": "bird",
//                           "keypoints": [[x, y, visible], ...]}
std::vector<CubImage> parse_cub_manifest(std::istream& in);

/// All ordered pairs per split, keyed by split id (ascending).
std::vector<std::pair<int, std::vector<KeypointPair>>> make_cub_pairs(std::span<const CubImage> images);

struct CubReport {
    std::vector<std::pair<int, double>> split_pck;
    double mean = 0.0;
    double alpha = 0.1;
    std::size_t pairs_skipped = 0;
};

CubReport evaluate_cub(const FeatureBackend& backend, std::span<const CubImage> dataset, const ImageProvider& images,
                       const ExtractionConfig& cfg, double alpha = 0.1, unsigned threads = 0);

}  // namespace dift
