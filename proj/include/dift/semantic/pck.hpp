#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dift/core/types.hpp"

namespace dift {

/// Which extent scales the PCK threshold.
enum class PckNorm { image, bbox };
/// How per-pair counts are pooled.
enum class PckAggregation {
    per_point,  // total correct / total predicted
    per_image,  // mean of per-pair PCK
};

const char* to_string(PckNorm norm);
const char* to_string(PckAggregation aggregation);

/// Real-valued (height, width) of the normalizing image or box.
struct Extent {
    double height = 0.0;
    double width = 0.0;
};

struct PckCount {
    std::size_t correct = 0;
    std::size_t total = 0;

    bool operator==(const PckCount&) const = default;
};

/// Prediction i is correct iff |pred_i - gt_i| <= alpha * max(h, w).
PckCount pck(std::span<const Point2D> predictions, std::span<const Point2D> ground_truth, Extent norm, double alpha);

/// Outcome for one evaluated image pair.
struct PairResult {
    std::string pair_id;
    std::string category;
    PckCount count;
};

struct PckReport {
    double alpha = 0.1;
    PckNorm norm = PckNorm::bbox;
    PckAggregation aggregation = PckAggregation::per_image;
    std::map<std::string, double> per_category;
    double mean_over_categories = 0.0;  // "Mean": average of the per-category values
    double overall = 0.0;               // "All": pooled over the whole dataset
    std::size_t pairs_evaluated = 0;
    std::size_t keypoints_evaluated = 0;
    std::size_t pairs_skipped = 0;
    std::vector<std::string> skipped_pairs;
};

/// Builds both the per-category and the pooled figure from per-pair counts.
/// Pairs without visible keypoints are ignored. The result does not depend on
/// the order of `pairs`. Throws ValidationError when nothing is left to score.
PckReport aggregate_pck(std::span<const PairResult> pairs, PckAggregation aggregation, double alpha, PckNorm norm);

}  // namespace dift
