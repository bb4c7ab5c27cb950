#include "dift/geometric/hpatches.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "dift/core/errors.hpp"
#include "dift/core/parallel.hpp"
#include "dift/core/random.hpp"
#include "dift/matching/matching.hpp"

namespace dift {
namespace fs = std::filesystem;

const char* to_string(ChangeType change) {
    return change == ChangeType::illumination ? "illumination" : "viewpoint";
}

Homography read_homography_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw NotFoundError("cannot open homography file " + file.string());
    std::array<double, 9> m{};
    for (double& v : m) {
        if (!(in >> v)) throw ValidationError("homography file " + file.string() + " must hold 9 numbers");
    }
    return Homography(m);
}

namespace {

fs::path find_image(const fs::path& dir, int index) {
    for (const char* ext : {".ppm", ".png", ".jpg", ".jpeg"}) {
        fs::path p = dir / (std::to_string(index) + ext);
        if (fs::exists(p)) return p;
    }
    throw NotFoundError("sequence " + dir.string() + " has no image " + std::to_string(index));
}

}  // namespace

HPatchesSequence load_hpatches_sequence(const fs::path& dir) {
    HPatchesSequence seq;
    seq.name = dir.filename().string();
    if (seq.name.rfind("i_", 0) == 0) {
        seq.change = ChangeType::illumination;
    } else if (seq.name.rfind("v_", 0) == 0) {
        seq.change = ChangeType::viewpoint;
    } else {
        throw ValidationError("sequence directory " + seq.name + " must start with i_ or v_");
    }
    seq.reference = find_image(dir, 1).string();
    for (int k = 2; k <= 6; ++k) {
        seq.targets[static_cast<std::size_t>(k - 2)] = find_image(dir, k).string();
        seq.ground_truth[static_cast<std::size_t>(k - 2)] = read_homography_file(dir / ("H_1_" + std::to_string(k)));
    }
    return seq;
}

std::vector<HPatchesSequence> load_hpatches(const fs::path& root) {
    if (!fs::is_directory(root)) throw NotFoundError("HPatches root " + root.string() + " is not a directory");
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<HPatchesSequence> out;
    for (const auto& d : dirs) out.push_back(load_hpatches_sequence(d));
    if (out.empty()) throw ValidationError("no sequences under " + root.string());
    return out;
}

fs::path keypoint_sidecar_path(const fs::path& image) {
    fs::path p = image;
    p.replace_extension(".kp.jsonl");
    return p;
}

std::vector<ScoredKeypoint> read_keypoint_sidecar(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw NotFoundError("missing keypoint file " + file.string());
    std::vector<ScoredKeypoint> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ScoredKeypoint kp;
            if (j.is_array()) {
                kp.point = {j.at(0).get<double>(), j.at(1).get<double>()};
                kp.score = j.size() > 2 ? j.at(2).get<double>() : 0.0;
            } else {
                kp.point = {j.at("x").get<double>(), j.at("y").get<double>()};
                kp.score = j.value("score", 0.0);
            }
            out.push_back(kp);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<Point2D> top_keypoints(std::vector<ScoredKeypoint> keypoints, std::size_t limit) {
    std::stable_sort(keypoints.begin(), keypoints.end(),
                     [](const ScoredKeypoint& a, const ScoredKeypoint& b) { return a.score > b.score; });
    if (keypoints.size() > limit) keypoints.resize(limit);
    std::vector<Point2D> out;
    out.reserve(keypoints.size());
    for (const auto& k : keypoints) out.push_back(k.point);
    return out;
}

KeypointProvider sidecar_keypoints() {
    return [](const std::string& image) {
        return top_keypoints(read_keypoint_sidecar(keypoint_sidecar_path(image)),
                             std::numeric_limits<std::size_t>::max());
    };
}

namespace {

struct PairTask {
    const HPatchesSequence* sequence;
    std::size_t target;
    std::string id;
};

struct PairOutcome {
    std::optional<HPatchesPairResult> result;  // empty when extraction failed
    CornerAccuracy accuracy;
};

std::vector<Point2D> checked_keypoints(const KeypointProvider& keypoints, const std::string& path,
                                       const ImageRef& image, std::size_t limit) {
    auto pts = keypoints(path);
    if (pts.size() > limit) pts.resize(limit);
    for (const auto& p : pts) require_point_in(p, image.dims(), "keypoint");
    return pts;
}

PairOutcome evaluate_pair(const FeatureBackend& backend, const PairTask& task, const ImageProvider& images,
                          const KeypointProvider& keypoints, const ExtractionConfig& cfg,
                          const HPatchesOptions& options) {
    const HPatchesSequence& seq = *task.sequence;
    const ImageRef reference = images(seq.reference);
    const ImageRef target = images(seq.targets[task.target]);
    const auto ref_kp = checked_keypoints(keypoints, seq.reference, reference, options.max_keypoints);
    const auto tgt_kp = checked_keypoints(keypoints, seq.targets[task.target], target, options.max_keypoints);

    FeatureMap fr;
    FeatureMap ft;
    try {
        fr = backend.extract(reference, cfg);
        ft = backend.extract(target, cfg);
    } catch (const BackendError&) {
        return {};
    }

    PairOutcome out;
    HPatchesPairResult r;
    r.pair_id = task.id;
    r.change = seq.change;
    std::vector<Correspondence> corr;
    if (!ref_kp.empty() && !tgt_kp.empty()) {
        for (const auto& m : mutual_nn_matches(fr, ft, ref_kp, tgt_kp)) {
            corr.push_back({ref_kp[m.source_index], tgt_kp[m.target_index]});
        }
    }
    r.matches = corr.size();
    try {
        RansacOptions ransac;
        ransac.threshold_px = options.ransac_threshold_px;
        ransac.max_iters = options.ransac_iters;
        ransac.seed = derive_seed(options.seed, hash_string(task.id));
        const auto est = estimate_homography(corr, ransac);
        r.inliers = est.inlier_count;
        out.accuracy = corner_accuracy(est.homography, seq.ground_truth[task.target], reference.dims(),
                                       options.epsilons);
        r.estimated = true;
        r.mean_corner_error = out.accuracy.mean_error;
    } catch (const EstimationError& e) {
        r.error = e.what();
        for (double eps : options.epsilons) out.accuracy.correct[eps] = false;
    }
    out.result = std::move(r);
    return out;
}

void tally(HPatchesAccuracy& acc, const CornerAccuracy& pair) {
    ++acc.pairs;
    for (const auto& [eps, ok] : pair.correct) acc.correct[eps] += ok ? 1 : 0;
}

void finish(HPatchesAccuracy& acc, std::span<const double> epsilons) {
    for (double eps : epsilons) {
        acc.correct.try_emplace(eps, 0);
        acc.accuracy[eps] = acc.pairs == 0 ? 0.0 : static_cast<double>(acc.correct[eps]) / acc.pairs;
    }
}

}  // namespace

HPatchesReport evaluate_hpatches(const FeatureBackend& backend, std::span<const HPatchesSequence> sequences,
                                 const ImageProvider& images, const KeypointProvider& keypoints,
                                 const ExtractionConfig& cfg, const HPatchesOptions& options) {
    if (sequences.empty()) throw ValidationError("evaluate_hpatches: no sequences");
    if (options.epsilons.empty()) throw ValidationError("evaluate_hpatches: no epsilon thresholds");
    if (options.max_keypoints == 0) throw ValidationError("evaluate_hpatches: max_keypoints must be positive");
    backend.validate(cfg);

    std::vector<PairTask> tasks;
    for (const auto& seq : sequences) {
        for (std::size_t k = 0; k < seq.targets.size(); ++k) {
            tasks.push_back({&seq, k, seq.name + "/1-" + std::to_string(k + 2)});
        }
    }
    std::vector<PairOutcome> outcomes(tasks.size());
    parallel_for(
        tasks.size(),
        [&](std::size_t i) { outcomes[i] = evaluate_pair(backend, tasks[i], images, keypoints, cfg, options); },
        options.threads);

    HPatchesReport report;
    report.epsilons = options.epsilons;
    std::sort(report.epsilons.begin(), report.epsilons.end());
    report.epsilons.erase(std::unique(report.epsilons.begin(), report.epsilons.end()), report.epsilons.end());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        auto& o = outcomes[i];
        if (!o.result) {
            report.skipped_pairs.push_back(tasks[i].id);
            continue;
        }
        if (!o.result->estimated) ++report.estimation_failures;
        tally(report.overall, o.accuracy);
        tally(o.result->change == ChangeType::illumination ? report.illumination : report.viewpoint, o.accuracy);
        report.pairs.push_back(std::move(*o.result));
    }
    if (report.pairs.empty()) throw BackendError("every HPatches pair failed feature extraction");
    finish(report.overall, report.epsilons);
    finish(report.illumination, report.epsilons);
    finish(report.viewpoint, report.epsilons);
    return report;
}

}  // namespace dift
