#include "dift/semantic/evaluate.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "dift/core/errors.hpp"
#include "dift/core/parallel.hpp"

namespace dift {
namespace {

using nlohmann::json;

Point2D point_from_json(const json& j) {
    if (!j.is_array() || j.size() < 2) throw ValidationError("expected a point [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

template <typename Parse>
auto parse_json_lines(std::istream& in, Parse parse) {
    std::vector<decltype(parse(json{}, std::size_t{}))> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse(json::parse(line), line_no));
        } catch (const json::exception& e) {
            throw ValidationError("manifest line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

struct PairOutcome {
    std::optional<PairResult> result;
    std::string skip_reason;
};

PairOutcome evaluate_pair(const FeatureBackend& backend, const KeypointPair& pair, const ImageProvider& images,
                          const ExtractionConfig& cfg, const SemanticEvalOptions& options) {
    ExtractionConfig pair_cfg = cfg;
    pair_cfg.prompt = render_prompt(cfg.prompt, pair.category);
    const ImageRef source = images(pair.source_image);
    const ImageRef target = images(pair.target_image);

    Extent norm{static_cast<double>(target.height()), static_cast<double>(target.width())};
    if (options.norm == PckNorm::bbox) {
        if (!pair.target_bbox) throw ValidationError("pair " + pair.id + " has no target_bbox for bbox normalization");
        pair.target_bbox->validate(target.dims());
        norm = {pair.target_bbox->height(), pair.target_bbox->width()};
    }

    FeatureMap fs;
    FeatureMap ft;
    try {
        fs = backend.extract(source, pair_cfg);
        ft = backend.extract(target, pair_cfg);
    } catch (const BackendError& e) {
        return {std::nullopt, e.what()};
    }

    std::vector<Point2D> predictions;
    std::vector<Point2D> ground_truth;
    for (const auto& kp : pair.keypoints) {
        if (!kp.visible) continue;
        predictions.push_back(best_match(fs, kp.source, ft, options.resolution).match.target_point);
        ground_truth.push_back(kp.target);
    }
    return {PairResult{pair.id, pair.category, pck(predictions, ground_truth, norm, options.alpha)}, {}};
}

}  // namespace

std::vector<KeypointPair> parse_pair_manifest(std::istream& in) {
    return parse_json_lines(in, [](const json& j, std::size_t line_no) {
        KeypointPair pair;
        pair.id = j.contains("id") ? j.at("id").get<std::string>() : std::to_string(line_no);
        pair.source_image = j.at("source_image").get<std::string>();
        pair.target_image = j.at("target_image").get<std::string>();
        pair.category = j.at("category").get<std::string>();
        if (pair.category.empty()) throw ValidationError("category must be non-empty");
        for (const auto& k : j.at("keypoints")) {
            KeypointCorrespondence kc;
            kc.source = point_from_json(k.at("source"));
            kc.target = point_from_json(k.at("target"));
            kc.visible = k.value("visible", true);
            pair.keypoints.push_back(kc);
        }
        if (j.contains("target_bbox") && !j.at("target_bbox").is_null()) {
            const auto b = j.at("target_bbox").get<std::vector<double>>();
            if (b.size() != 4) throw ValidationError("target_bbox needs 4 numbers");
            pair.target_bbox = BoundingBox{b[0], b[1], b[2], b[3]};
        }
        return pair;
    });
}

SemanticEvaluation evaluate_dataset(const FeatureBackend& backend, std::span<const KeypointPair> dataset,
                                    const ImageProvider& images, const ExtractionConfig& cfg,
                                    const SemanticEvalOptions& options) {
    if (dataset.empty()) throw ValidationError("evaluate_dataset: dataset is empty");
    backend.validate(cfg);

    std::vector<PairOutcome> outcomes(dataset.size());
    parallel_for(
        dataset.size(), [&](std::size_t i) { outcomes[i] = evaluate_pair(backend, dataset[i], images, cfg, options); },
        options.threads);

    SemanticEvaluation out;
    std::vector<std::string> skipped;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].result) {
            out.pairs.push_back(*outcomes[i].result);
        } else {
            skipped.push_back(dataset[i].id);
        }
    }
    if (out.pairs.empty()) throw BackendError("every pair failed feature extraction");
    out.report = aggregate_pck(out.pairs, options.aggregation, options.alpha, options.norm);
    std::sort(skipped.begin(), skipped.end());
    out.report.pairs_skipped = skipped.size();
    out.report.skipped_pairs = std::move(skipped);
    return out;
}

GridSearchResult grid_search(const FeatureBackend& backend, std::span<const KeypointPair> tuning_set,
                             const ImageProvider& images, const ExtractionConfig& base_cfg,
                             std::span<const int> t_candidates, std::span<const int> block_candidates,
                             const SemanticEvalOptions& options) {
    const std::set<int> ts(t_candidates.begin(), t_candidates.end());
    const std::set<int> blocks(block_candidates.begin(), block_candidates.end());
    if (ts.empty() || blocks.empty()) throw ValidationError("grid_search: candidate sets must be non-empty");

    GridSearchResult out;
    bool found = false;
    for (int t : ts) {
        for (int n : blocks) {
            GridSearchCell cell{t, n, std::nullopt, {}};
            ExtractionConfig cfg = base_cfg;
            cfg.t = t;
            cfg.block_index = n;
            try {
                cell.score = evaluate_dataset(backend, tuning_set, images, cfg, options).report.overall;
            } catch (const Error& e) {
                cell.error = e.what();
            }
            if (cell.score && (!found || *cell.score > out.best_score)) {
                found = true;
                out.best_t = t;
                out.best_block = n;
                out.best_score = *cell.score;
            }
            out.cells.push_back(std::move(cell));
        }
    }
    if (!found) throw ValidationError("grid_search: every candidate failed; first error: " + out.cells.front().error);
    return out;
}

std::vector<CubImage> parse_cub_manifest(std::istream& in) {
    return parse_json_lines(in, [](const json& j, std::size_t) {
        CubImage img;
        img.image = j.at("image").get<std::string>();
        img.split = j.at("split").get<int>();
        img.category = j.value("category", std::string("bird"));
        for (const auto& k : j.at("keypoints")) {
            if (!k.is_array() || k.size() < 2) throw ValidationError("CUB keypoint must be [x, y, visible]");
            const bool visible = k.size() < 3 || k[2].get<double>() > 0.0;
            if (visible) {
                img.keypoints.emplace_back(Point2D{k[0].get<double>(), k[1].get<double>()});
            } else {
                img.keypoints.emplace_back(std::nullopt);
            }
        }
        return img;
    });
}

std::vector<std::pair<int, std::vector<KeypointPair>>> make_cub_pairs(std::span<const CubImage> images) {
    std::map<int, std::vector<const CubImage*>> splits;
    for (const auto& img : images) splits[img.split].push_back(&img);

    std::vector<std::pair<int, std::vector<KeypointPair>>> out;
    for (const auto& [split, members] : splits) {
        std::vector<KeypointPair> pairs;
        for (std::size_t a = 0; a < members.size(); ++a) {
            for (std::size_t b = 0; b < members.size(); ++b) {
                if (a == b) continue;
                const CubImage& src = *members[a];
                const CubImage& tgt = *members[b];
                KeypointPair pair;
                pair.id = std::to_string(split) + ":" + src.image + "->" + tgt.image;
                pair.source_image = src.image;
                pair.target_image = tgt.image;
                pair.category = src.category;
                const std::size_t n = std::min(src.keypoints.size(), tgt.keypoints.size());
                for (std::size_t k = 0; k < n; ++k) {
                    if (src.keypoints[k] && tgt.keypoints[k]) {
                        pair.keypoints.push_back({*src.keypoints[k], *tgt.keypoints[k], true});
                    }
                }
                pairs.push_back(std::move(pair));
            }
        }
        out.emplace_back(split, std::move(pairs));
    }
    return out;
}

CubReport evaluate_cub(const FeatureBackend& backend, std::span<const CubImage> dataset, const ImageProvider& images,
                       const ExtractionConfig& cfg, double alpha, unsigned threads) {
    const auto splits = make_cub_pairs(dataset);
    if (splits.empty()) throw ValidationError("evaluate_cub: dataset is empty");
    SemanticEvalOptions options;
    options.alpha = alpha;
    options.norm = PckNorm::image;
    options.aggregation = PckAggregation::per_point;
    options.threads = threads;

    CubReport report;
    report.alpha = alpha;
    double sum = 0.0;
    for (const auto& [split, pairs] : splits) {
        const auto eval = evaluate_dataset(backend, pairs, images, cfg, options);
        report.split_pck.emplace_back(split, eval.report.overall);
        report.pairs_skipped += eval.report.pairs_skipped;
        sum += eval.report.overall;
    }
    report.mean = sum / static_cast<double>(report.split_pck.size());
    return report;
}

}  // namespace dift
