#include "dift/temporal/video_eval.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>

#include <json.hpp>

#include "dift/core/errors.hpp"
#include "dift/core/parallel.hpp"

namespace dift {
namespace fs = std::filesystem;

std::vector<VideoSequence> load_davis(const fs::path& root, const std::string& resolution,
                                      const std::optional<fs::path>& split_file) {
    const fs::path frames_root = root / "JPEGImages" / resolution;
    const fs::path masks_root = root / "Annotations" / resolution;
    if (!fs::is_directory(frames_root)) throw NotFoundError("missing frame directory " + frames_root.string());

    std::vector<std::string> names;
    if (split_file) {
        std::ifstream in(*split_file);
        if (!in) throw NotFoundError("cannot open split file " + split_file->string());
        std::string line;
        while (std::getline(in, line)) {
            line.erase(line.find_last_not_of(" \t\r") + 1);
            if (!line.empty()) names.push_back(line);
        }
    } else {
        for (const auto& e : fs::directory_iterator(frames_root)) {
            if (e.is_directory()) names.push_back(e.path().filename().string());
        }
        std::sort(names.begin(), names.end());
    }

    std::vector<VideoSequence> out;
    for (const auto& name : names) {
        VideoSequence v;
        v.name = name;
        std::vector<fs::path> frames;
        const fs::path dir = frames_root / name;
        if (!fs::is_directory(dir)) throw NotFoundError("missing video directory " + dir.string());
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file()) frames.push_back(e.path());
        }
        std::sort(frames.begin(), frames.end());
        for (const auto& f : frames) {
            v.frames.push_back(f.string());
            const fs::path m = masks_root / name / (f.stem().string() + ".png");
            v.masks.push_back(fs::exists(m) ? m.string() : std::string());
        }
        if (v.frames.empty()) throw ValidationError("video " + name + " has no frames");
        if (v.masks.front().empty()) throw NotFoundError("video " + name + " has no first-frame annotation");
        out.push_back(std::move(v));
    }
    if (out.empty()) throw ValidationError("no videos under " + root.string());
    return out;
}

namespace {

std::vector<FeatureMap> extract_frames(const FeatureBackend& backend, std::span<const std::string> frames,
                                       const ImageProvider& images, const ExtractionConfig& cfg, unsigned threads,
                                       std::vector<Dims>* dims) {
    std::vector<FeatureMap> features(frames.size());
    std::vector<Dims> frame_dims(frames.size());
    parallel_for(
        frames.size(),
        [&](std::size_t i) {
            const ImageRef img = images(frames[i]);
            frame_dims[i] = img.dims();
            features[i] = backend.extract(img, cfg);
        },
        threads);
    if (dims) *dims = std::move(frame_dims);
    return features;
}

}  // namespace

std::vector<HardMask> segment_video(const FeatureBackend& backend, const VideoSequence& video,
                                    const ImageProvider& images, const MaskProvider& masks,
                                    const ExtractionConfig& cfg, const PropagationConfig& propagation,
                                    unsigned threads) {
    if (video.frames.empty()) throw ValidationError("video " + video.name + " has no frames");
    if (video.masks.empty() || video.masks.front().empty()) {
        throw ValidationError("video " + video.name + " has no first-frame annotation");
    }
    std::vector<Dims> dims;
    const auto features = extract_frames(backend, video.frames, images, cfg, threads, &dims);
    const HardMask first = masks(video.masks.front());
    if (first.dims() != dims.front()) throw ValidationError("first annotation of " + video.name + " differs in size from its frame");

    const Dims grid = features.front().grid_dims();
    const LabelMask seed = LabelMask::one_hot(downsample_nearest(first, grid), first.max_label() + 1);
    const auto propagated = propagate_labels(features, seed, propagation, threads);

    std::vector<HardMask> out;
    out.reserve(propagated.size());
    out.push_back(first);
    for (std::size_t i = 1; i < propagated.size(); ++i) out.push_back(upsample_bilinear(propagated[i], dims[i]).hard());
    return out;
}

std::vector<std::size_t> scored_frames(std::size_t n) {
    std::vector<std::size_t> out;
    if (n >= 3) {
        for (std::size_t i = 1; i + 1 < n; ++i) out.push_back(i);
    } else {
        for (std::size_t i = 1; i < n; ++i) out.push_back(i);
    }
    return out;
}

std::vector<ObjectScore> score_video(const std::string& name, std::span<const HardMask> predictions,
                                     std::span<const std::optional<HardMask>> truth,
                                     std::optional<double> contour_tolerance) {
    if (predictions.size() != truth.size()) throw ValidationError("prediction and annotation counts differ");
    if (truth.empty() || !truth.front()) throw ValidationError("video " + name + " has no first-frame annotation");
    const int objects = truth.front()->max_label();
    std::vector<ObjectScore> out;
    for (int obj = 1; obj <= objects; ++obj) {
        ObjectScore s;
        s.video = name;
        s.object_id = obj;
        for (std::size_t f : scored_frames(predictions.size())) {
            if (!truth[f]) continue;
            const double tol = contour_tolerance.value_or(default_contour_tolerance(truth[f]->dims()));
            s.J += jaccard_J(predictions[f], *truth[f], obj);
            s.F += contour_F(predictions[f], *truth[f], obj, tol);
            ++s.frames;
        }
        if (s.frames == 0) continue;
        s.J /= static_cast<double>(s.frames);
        s.F /= static_cast<double>(s.frames);
        out.push_back(s);
    }
    return out;
}

DavisReport summarize_objects(std::vector<ObjectScore> objects, std::size_t videos) {
    if (objects.empty()) throw ValidationError("no object was scored");
    std::sort(objects.begin(), objects.end(), [](const ObjectScore& a, const ObjectScore& b) {
        return std::tie(a.video, a.object_id) < std::tie(b.video, b.object_id);
    });
    DavisReport r;
    for (const auto& o : objects) {
        r.J_mean += o.J;
        r.F_mean += o.F;
    }
    r.J_mean /= static_cast<double>(objects.size());
    r.F_mean /= static_cast<double>(objects.size());
    r.JF_mean = (r.J_mean + r.F_mean) / 2.0;
    r.objects = std::move(objects);
    r.videos = videos;
    return r;
}

DavisReport evaluate_davis(const FeatureBackend& backend, std::span<const VideoSequence> videos,
                           const ImageProvider& images, const MaskProvider& masks, const ExtractionConfig& cfg,
                           const DavisOptions& options) {
    if (videos.empty()) throw ValidationError("evaluate_davis: no videos");
    options.propagation.validate();
    backend.validate(cfg);
    std::vector<ObjectScore> objects;
    for (const auto& video : videos) {
        const auto pred = segment_video(backend, video, images, masks, cfg, options.propagation, options.threads);
        std::vector<std::optional<HardMask>> truth(video.frames.size());
        for (std::size_t i = 0; i < video.frames.size(); ++i) {
            if (i < video.masks.size() && !video.masks[i].empty()) truth[i] = masks(video.masks[i]);
        }
        auto scores = score_video(video.name, pred, truth, options.contour_tolerance);
        objects.insert(objects.end(), scores.begin(), scores.end());
    }
    return summarize_objects(std::move(objects), videos.size());
}

std::vector<PoseVideo> parse_pose_manifest(std::istream& in) {
    std::vector<PoseVideo> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            PoseVideo v;
            v.name = j.value("name", std::to_string(line_no));
            v.frames = j.at("frames").get<std::vector<std::string>>();
            for (const auto& frame : j.at("keypoints")) {
                std::vector<Point2D> pts;
                for (const auto& p : frame) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
                v.keypoints.push_back(std::move(pts));
            }
            if (v.frames.empty()) throw ValidationError("video has no frames");
            if (v.keypoints.size() != v.frames.size()) throw ValidationError("need one keypoint list per frame");
            for (const auto& k : v.keypoints) {
                if (k.size() != v.keypoints.front().size() || k.empty()) {
                    throw ValidationError("every frame needs the same non-zero number of keypoints");
                }
            }
            out.push_back(std::move(v));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("pose manifest line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("pose manifest line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

JhmdbReport evaluate_jhmdb(const FeatureBackend& backend, std::span<const PoseVideo> videos,
                           const ImageProvider& images, const ExtractionConfig& cfg, const JhmdbOptions& options) {
    if (videos.empty()) throw ValidationError("evaluate_jhmdb: no videos");
    if (options.alphas.empty()) throw ValidationError("evaluate_jhmdb: no alpha thresholds");
    options.propagation.validate();
    backend.validate(cfg);

    JhmdbReport report;
    for (double a : options.alphas) report.correct[a] = 0;
    for (const auto& video : videos) {
        std::vector<Dims> dims;
        const auto features = extract_frames(backend, video.frames, images, cfg, options.threads, &dims);
        const auto track = track_keypoints(features, video.keypoints.front(), options.propagation, options.threads);
        for (std::size_t f = 1; f < video.frames.size(); ++f) {
            double nh = dims[f].height;
            double nw = dims[f].width;
            if (options.norm == PoseNorm::person_bbox) {
                const BoundingBox b = points_bbox(video.keypoints[f]);
                nh = b.height();
                nw = b.width();
            }
            for (double a : options.alphas) {
                report.correct[a] += keypoint_pck(track.frames[f], video.keypoints[f], nh, nw, a).correct;
            }
            report.keypoints += video.keypoints[f].size();
        }
    }
    report.videos = videos.size();
    if (report.keypoints == 0) throw ValidationError("evaluate_jhmdb: every video has a single frame");
    for (const auto& [a, c] : report.correct) {
        report.pck[a] = static_cast<double>(c) / static_cast<double>(report.keypoints);
    }
    return report;
}

}  // namespace dift
