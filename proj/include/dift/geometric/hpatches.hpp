#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dift/diffusion/backend.hpp"
#include "dift/geometric/homography.hpp"

namespace dift {

enum class ChangeType { illumination, viewpoint };

const char* to_string(ChangeType change);

/// A reference image, five targets and the ground-truth reference->target maps.
struct HPatchesSequence {
    std::string name;
    ChangeType change = ChangeType::illumination;
    std::string reference;
    std::array<std::string, 5> targets;
    std::array<Homography, 5> ground_truth;
};

/// Reads one sequence in the native layout: images 1..6 (any of .ppm, .png,
/// .jpg), homography files H_1_2 .. H_1_6 as 3x3 row-major text. The change
/// type comes from the directory prefix: "i_" illumination, "v_" viewpoint.
HPatchesSequence load_hpatches_sequence(const std::filesystem::path& dir);

/// Every sequence directory under root, sorted by name.
std::vector<HPatchesSequence> load_hpatches(const std::filesystem::path& root);

Homography read_homography_file(const std::filesystem::path& file);

struct ScoredKeypoint {
    Point2D point;
    double score = 0.0;
};

/// Keypoint sidecar of an image: same path with the extension replaced by
/// ".kp.jsonl"; one keypoint per line, either {"x", "y", "score"} or
/// [x, y, score].
std::filesystem::path keypoint_sidecar_path(const std::filesystem::path& image);
std::vector<ScoredKeypoint> read_keypoint_sidecar(const std::filesystem::path& file);

/// The `limit` highest-scoring keypoints (ties: file order).
std::vector<Point2D> top_keypoints(std::vector<ScoredKeypoint> keypoints, std::size_t limit);

using KeypointProvider = std::function<std::vector<Point2D>(const std::string& image)>;

/// Reads the sidecar next to each image path.
KeypointProvider sidecar_keypoints();

struct HPatchesOptions {
    std::vector<double> epsilons = {1.0, 3.0, 5.0};
    std::size_t max_keypoints = 1000;
    double ransac_threshold_px = 3.0;
    int ransac_iters = 2000;
    std::uint64_t seed = 0;  // per-pair RANSAC seeds derive from this and the pair id
    unsigned threads = 0;
};

struct HPatchesPairResult {
    std::string pair_id;
    ChangeType change = ChangeType::illumination;
    bool estimated = false;
    double mean_corner_error = 0.0;  // meaningful only when estimated
    std::size_t matches = 0;
    std::size_t inliers = 0;
    std::string error;
};

struct HPatchesAccuracy {
    std::size_t pairs = 0;
    std::map<double, std::size_t> correct;
    std::map<double, double> accuracy;  // correct / pairs
};

struct HPatchesReport {
    std::vector<double> epsilons;
    HPatchesAccuracy overall;
    HPatchesAccuracy illumination;
    HPatchesAccuracy viewpoint;
    std::size_t estimation_failures = 0;  // counted incorrect at every epsilon
    std::vector<std::string> skipped_pairs;  // extraction failures, not scored
    std::vector<HPatchesPairResult> pairs;   // sequence order, targets ascending
};

/// Reference-to-target homography accuracy: keypoint descriptors via
/// feature_at, mutual nearest neighbours, RANSAC, then corner accuracy.
HPatchesReport evaluate_hpatches(const FeatureBackend& backend, std::span<const HPatchesSequence> sequences,
                                 const ImageProvider& images, const KeypointProvider& keypoints,
                                 const ExtractionConfig& cfg, const HPatchesOptions& options = {});

}  // namespace dift
