#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dift/diffusion/backend.hpp"
#include "dift/temporal/label_mask.hpp"
#include "dift/temporal/metrics.hpp"
#include "dift/temporal/propagation.hpp"

namespace dift {

/// Decodes an annotation image into integer labels.
using MaskProvider = std::function<HardMask(const std::string& path)>;

/// Frames in playback order; masks[i] annotates frames[i] ("" = unannotated).
struct VideoSequence {
    std::string name;
    std::vector<std::string> frames;
    std::vector<std::string> masks;
};

/// DAVIS layout: JPEGImages/<resolution>/<video>/*.jpg with annotations of the
/// same stem under Annotations/<resolution>/<video>/*.png. Videos come from
/// the split file (one name per line) when given, else every directory.
std::vector<VideoSequence> load_davis(const std::filesystem::path& root, const std::string& resolution = "480p",
                                      const std::optional<std::filesystem::path>& split_file = std::nullopt);

/// Full-resolution hard predictions for every frame of a video, seeded by the
/// first frame's annotation.
std::vector<HardMask> segment_video(const FeatureBackend& backend, const VideoSequence& video,
                                    const ImageProvider& images, const MaskProvider& masks,
                                    const ExtractionConfig& cfg, const PropagationConfig& propagation,
                                    unsigned threads = 0);

struct DavisOptions {
    PropagationConfig propagation;
    std::optional<double> contour_tolerance;  // default: per-frame ceil(0.008 * diagonal)
    unsigned threads = 0;
};

struct ObjectScore {
    std::string video;
    int object_id = 0;
    double J = 0.0;  // mean over scored frames
    double F = 0.0;
    std::size_t frames = 0;
};

struct DavisReport {
    double J_mean = 0.0;  // mean over objects of per-object means
    double F_mean = 0.0;
    double JF_mean = 0.0;
    std::vector<ObjectScore> objects;
    std::size_t videos = 0;
};

/// Indices of the frames scored in a video of n frames: the first and the
/// last are excluded when n >= 3; otherwise every frame after the first.
std::vector<std::size_t> scored_frames(std::size_t n);

/// Scores predictions against annotations for the objects of the first mask.
std::vector<ObjectScore> score_video(const std::string& name, std::span<const HardMask> predictions,
                                     std::span<const std::optional<HardMask>> truth,
                                     std::optional<double> contour_tolerance);

DavisReport summarize_objects(std::vector<ObjectScore> objects, std::size_t videos);

DavisReport evaluate_davis(const FeatureBackend& backend, std::span<const VideoSequence> videos,
                           const ImageProvider& images, const MaskProvider& masks, const ExtractionConfig& cfg,
                           const DavisOptions& options);

/// A video with per-frame pose annotations (same keypoint order every frame).
struct PoseVideo {
    std::string name;
    std::vector<std::string> frames;
    std::vector<std::vector<Point2D>> keypoints;
};

// Pose manifest: JSON lines {"name": "...", "frames": ["f0.png", ...],
//                            "keypoints": [[[x, y], ...], ...]}  (one list per frame)
std::vector<PoseVideo> parse_pose_manifest(std::istream& in);

enum class PoseNorm {
    person_bbox,  // max side of the box around the frame's annotated joints
    frame,        // max(frame height, frame width)
};

struct JhmdbOptions {
    PropagationConfig propagation{0.1, 5, 15, 14};
    std::vector<double> alphas = {0.1, 0.2};
    PoseNorm norm = PoseNorm::person_bbox;
    unsigned threads = 0;
};

struct JhmdbReport {
    std::map<double, double> pck;
    std::map<double, std::size_t> correct;
    std::size_t keypoints = 0;  // scored keypoints (frames after the first)
    std::size_t videos = 0;
};

JhmdbReport evaluate_jhmdb(const FeatureBackend& backend, std::span<const PoseVideo> videos,
                           const ImageProvider& images, const ExtractionConfig& cfg, const JhmdbOptions& options);

}  // namespace dift
