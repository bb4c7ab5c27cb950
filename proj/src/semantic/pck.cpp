#include "dift/semantic/pck.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "dift/core/errors.hpp"

namespace dift {

const char* to_string(PckNorm norm) { return norm == PckNorm::image ? "img" : "bbox"; }

const char* to_string(PckAggregation aggregation) {
    return aggregation == PckAggregation::per_point ? "point" : "image";
}

PckCount pck(std::span<const Point2D> predictions, std::span<const Point2D> ground_truth, Extent norm, double alpha) {
    if (predictions.size() != ground_truth.size()) {
        throw ValidationError("pck: prediction and ground-truth lists differ in length");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("pck: alpha must lie in [0, 1]");
    const double threshold = alpha * std::max(norm.height, norm.width);
    PckCount out;
    out.total = predictions.size();
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = std::hypot(predictions[i].x - ground_truth[i].x, predictions[i].y - ground_truth[i].y);
        if (d <= threshold) ++out.correct;
    }
    return out;
}

namespace {

struct Tally {
    std::size_t correct = 0;
    std::size_t total = 0;
    double ratio_sum = 0.0;
    std::size_t pairs = 0;

    void add(const PckCount& c) {
        correct += c.correct;
        total += c.total;
        ratio_sum += static_cast<double>(c.correct) / static_cast<double>(c.total);
        ++pairs;
    }
    double value(PckAggregation aggregation) const {
        return aggregation == PckAggregation::per_point ? static_cast<double>(correct) / static_cast<double>(total)
                                                        : ratio_sum / static_cast<double>(pairs);
    }
};

}  // namespace

PckReport aggregate_pck(std::span<const PairResult> pairs, PckAggregation aggregation, double alpha, PckNorm norm) {
    std::vector<PairResult> sorted;
    for (const auto& p : pairs) {
        if (p.count.total > 0) sorted.push_back(p);
    }
    if (sorted.empty()) throw ValidationError("aggregate_pck: no pair with a visible keypoint");
    // Canonical order makes the floating-point sums independent of input order.
    std::sort(sorted.begin(), sorted.end(), [](const PairResult& a, const PairResult& b) {
        return std::tie(a.category, a.pair_id, a.count.correct, a.count.total) <
               std::tie(b.category, b.pair_id, b.count.correct, b.count.total);
    });

    std::map<std::string, Tally> by_category;
    Tally all;
    for (const auto& p : sorted) {
        by_category[p.category].add(p.count);
        all.add(p.count);
    }

    PckReport report;
    report.alpha = alpha;
    report.norm = norm;
    report.aggregation = aggregation;
    double category_sum = 0.0;
    for (const auto& [category, tally] : by_category) {
        const double v = tally.value(aggregation);
        report.per_category[category] = v;
        category_sum += v;
    }
    report.mean_over_categories = category_sum / static_cast<double>(by_category.size());
    report.overall = all.value(aggregation);
    report.pairs_evaluated = all.pairs;
    report.keypoints_evaluated = all.total;
    return report;
}

}  // namespace dift
