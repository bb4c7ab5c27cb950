#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "dift/core/coords.hpp"
#include "dift/core/errors.hpp"
#include "dift/diffusion/toy_backend.hpp"
#include "dift/temporal/label_mask.hpp"
#include "dift/temporal/metrics.hpp"
#include "dift/temporal/propagation.hpp"
#include "dift/temporal/video_eval.hpp"
#include "propagation_fixtures.hpp"
#include "synthetic.hpp"

namespace dift {
namespace {

using testing::copied_frames;
using testing::hard_nn;
using testing::HardOracle;
using testing::roll_mask;
using testing::rolling_frames;

HardMask rect_mask(Dims d, int y0, int x0, int y1, int x1, int label = 1) {
    HardMask m(d.height, d.width);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) m.at(y, x) = label;
    }
    return m;
}

TEST(Jaccard, HandComputed) {
    const HardMask a(1, 3, {1, 1, 0});
    const HardMask b(1, 3, {0, 1, 1});
    EXPECT_DOUBLE_EQ(jaccard_J(a, b, 1), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(jaccard_J(a, a, 1), 1.0);
    EXPECT_DOUBLE_EQ(jaccard_J(a, b, 7), 1.0);  // absent from both
    EXPECT_DOUBLE_EQ(jaccard_J(a, HardMask(1, 3), 1), 0.0);
    EXPECT_THROW(jaccard_J(a, HardMask(3, 1), 1), ValidationError);
}

TEST(Jaccard, SymmetricOnRandomMasks) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> lab(0, 2);
    for (int i = 0; i < 50; ++i) {
        HardMask a(9, 7);
        HardMask b(9, 7);
        for (int y = 0; y < 9; ++y) {
            for (int x = 0; x < 7; ++x) {
                a.at(y, x) = lab(rng);
                b.at(y, x) = lab(rng);
            }
        }
        for (int obj : {1, 2}) {
            EXPECT_DOUBLE_EQ(jaccard_J(a, b, obj), jaccard_J(b, a, obj));
            EXPECT_DOUBLE_EQ(contour_F(a, b, obj, 1.5), contour_F(b, a, obj, 1.5));
        }
    }
}

TEST(ContourF, BoundaryExcludesImageEdges) {
    const HardMask full(4, 4, 1);
    const auto none = object_boundary(full, 1);
    EXPECT_EQ(std::count(none.begin(), none.end(), true), 0);
    const auto b = object_boundary(rect_mask({5, 5}, 1, 1, 4, 4), 1);
    // A 3x3 square: every pixel but the center touches the background.
    EXPECT_EQ(std::count(b.begin(), b.end(), true), 8);
}

TEST(ContourF, ShiftWithinToleranceIsPerfect) {
    const HardMask a = rect_mask({20, 20}, 5, 5, 12, 12);
    const HardMask b = rect_mask({20, 20}, 5, 6, 12, 13);
    EXPECT_DOUBLE_EQ(contour_F(a, b, 1, 1.0), 1.0);
    EXPECT_LT(contour_F(a, b, 1, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(contour_F(a, a, 1, 0.0), 1.0);
}

TEST(ContourF, EmptyBoundaries) {
    const HardMask empty(6, 6);
    const HardMask obj = rect_mask({6, 6}, 2, 2, 4, 4);
    EXPECT_DOUBLE_EQ(contour_F(empty, empty, 1, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(contour_F(empty, obj, 1, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(contour_F(obj, empty, 1, 1.0), 0.0);
    EXPECT_THROW(contour_F(obj, obj, 1, -1.0), ValidationError);
}

TEST(ContourF, DefaultTolerance) {
    // 0.008 * hypot(480, 854) = 7.84
    EXPECT_DOUBLE_EQ(default_contour_tolerance({480, 854}), 8.0);
    EXPECT_DOUBLE_EQ(default_contour_tolerance({3, 4}), 1.0);
}

TEST(KeypointPck, ThresholdUsesLongerSide) {
    const std::vector<Point2D> pred = {{0, 0}, {10, 0}, {0, 21}};
    const std::vector<Point2D> truth = {{0, 0}, {0, 0}, {0, 0}};
    const auto r = keypoint_pck(pred, truth, 50, 100, 0.2);  // threshold 20
    EXPECT_EQ(r.correct, 2u);
    EXPECT_EQ(r.total, 3u);
    EXPECT_DOUBLE_EQ(r.value(), 2.0 / 3.0);
    const auto b = points_bbox(pred);
    EXPECT_EQ(b.x_max, 10);
    EXPECT_EQ(b.y_max, 21);
}

TEST(LabelMask, OneHotAndHard) {
    const HardMask h(2, 2, {0, 2, 1, 2});
    const LabelMask m = LabelMask::one_hot(h, 3);
    EXPECT_EQ(m.num_labels(), 3);
    EXPECT_EQ(m.at(2, 0, 1), 1.0);
    EXPECT_EQ(m.hard(), h);
    EXPECT_THROW(LabelMask::one_hot(h, 2), ValidationError);
}

TEST(LabelMask, RejectsNonDistributions) {
    EXPECT_THROW(LabelMask(Tensor3<double>(2, 1, 1, 0.6)), ValidationError);
    EXPECT_THROW(LabelMask(Tensor3<double>(2, 1, 1, std::vector<double>{1.5, -0.5})), ValidationError);
    EXPECT_NO_THROW(LabelMask(Tensor3<double>(2, 1, 1, 0.5)));
}

TEST(LabelMask, HardTieGoesToSmallerLabel) {
    EXPECT_EQ(LabelMask(Tensor3<double>(2, 1, 1, 0.5)).hard().at(0, 0), 0);
}

TEST(LabelMask, NearestDownsampleAndBilinearUpsample) {
    const HardMask big = rect_mask({8, 8}, 0, 4, 8, 8);
    const HardMask small = downsample_nearest(big, {4, 4});
    EXPECT_EQ(small, rect_mask({4, 4}, 0, 2, 4, 4));
    const LabelMask up = upsample_bilinear(LabelMask::one_hot(small, 2), {8, 8});
    EXPECT_EQ(up.hard(), big);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) EXPECT_NEAR(up.at(0, y, x) + up.at(1, y, x), 1.0, 1e-12);
    }
}

TEST(Propagation, StaticVideoIsIdentity) {
    const FeatureMap f = testing::orthogonal_cell_features(6, 7);
    const std::vector<FeatureMap> frames(12, f);
    HardMask first = rect_mask({6, 7}, 1, 2, 5, 6, 1);
    first.at(0, 0) = 2;
    const auto masks = propagate_labels(frames, LabelMask::one_hot(first, 3), PropagationConfig{});
    ASSERT_EQ(masks.size(), 12u);
    for (const auto& m : masks) {
        EXPECT_EQ(m.hard(), first);
        for (int obj : {1, 2}) {
            EXPECT_EQ(jaccard_J(m.hard(), first, obj), 1.0);
            EXPECT_EQ(contour_F(m.hard(), first, obj, 0.0), 1.0);
        }
    }
}

TEST(Propagation, OneCellTranslationTracksExactly) {
    const int h = 5;
    const int w = 8;
    const auto frames = rolling_frames(20, h, w, {h, w});
    const HardMask first = rect_mask({h, w}, 1, 1, 4, 3, 1);
    PropagationConfig cfg;
    cfg.radius = w;  // the cyclic shift can cross the whole grid
    cfg.context_frames = 4;
    const auto masks = propagate_labels(frames, LabelMask::one_hot(first, 2), cfg);
    for (int k = 0; k < 20; ++k) EXPECT_EQ(masks[k].hard(), roll_mask(first, k)) << "frame " << k;
}

TEST(Propagation, TranslatedKeypointsTrackExactly) {
    const int h = 4;
    const int w = 6;
    const Dims src{16, 24};
    const auto frames = rolling_frames(6, h, w, src);
    PropagationConfig cfg;
    cfg.radius = w;
    const std::vector<Point2D> kp = {cell_center_pixel(1, 3, src, {h, w}), cell_center_pixel(2, 5, src, {h, w})};
    const auto track = track_keypoints(frames, kp, cfg);
    ASSERT_EQ(track.frames.size(), 6u);
    for (int k = 1; k < 6; ++k) {
        EXPECT_EQ(track.frames[k][0], cell_center_pixel(1, (3 - k + w) % w, src, {h, w}));
        EXPECT_EQ(track.frames[k][1], cell_center_pixel(2, (5 - k + w) % w, src, {h, w}));
    }
}

TEST(Propagation, DistributionsSumToOneOverLongVideos) {
    std::mt19937_64 rng(3);
    std::vector<FeatureMap> frames;
    for (int k = 0; k < 36; ++k) frames.push_back(testing::random_features(8, 9, 10, rng));
    HardMask first(9, 10);
    std::uniform_int_distribution<int> lab(0, 3);
    for (int y = 0; y < 9; ++y) {
        for (int x = 0; x < 10; ++x) first.at(y, x) = lab(rng);
    }
    PropagationConfig cfg;
    cfg.radius = 3;
    cfg.context_frames = 5;
    const auto masks = propagate_labels(frames, LabelMask::one_hot(first, 4), cfg);
    ASSERT_EQ(masks.size(), 36u);
    for (const auto& m : masks) {
        for (int y = 0; y < 9; ++y) {
            for (int x = 0; x < 10; ++x) {
                double s = 0.0;
                for (int l = 0; l < 4; ++l) {
                    EXPECT_GE(m.at(l, y, x), 0.0);
                    s += m.at(l, y, x);
                }
                EXPECT_NEAR(s, 1.0, 1e-6);
            }
        }
    }
}

TEST(Propagation, LowTemperatureMatchesHardNearestNeighbour) {
    PropagationConfig cfg;
    cfg.temperature = 1e-4;
    cfg.radius = 2;
    cfg.context_frames = 3;
    cfg.top_k = 10;
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 40 && checked < 5; ++seed) {
        std::mt19937_64 rng(seed);
        const auto frames = copied_frames(8, 7, cfg.radius, cfg.context_frames, rng);
        HardMask first(7, 7);
        std::uniform_int_distribution<int> lab(0, 2);
        for (int y = 0; y < 7; ++y) {
            for (int x = 0; x < 7; ++x) first.at(y, x) = lab(rng);
        }
        const HardOracle oracle = hard_nn(frames, first, cfg.radius, cfg.context_frames);
        // Near-ties leave the low-temperature softmax genuinely soft.
        if (oracle.min_label_gap < 2e-3) continue;
        ++checked;
        const auto masks = propagate_labels(frames, LabelMask::one_hot(first, 3), cfg);
        for (int k = 0; k < 8; ++k) {
            const LabelMask expect = LabelMask::one_hot(oracle.masks[k], 3);
            for (int l = 0; l < 3; ++l) {
                for (int y = 0; y < 7; ++y) {
                    for (int x = 0; x < 7; ++x) EXPECT_NEAR(masks[k].at(l, y, x), expect.at(l, y, x), 1e-6);
                }
            }
        }
    }
    EXPECT_EQ(checked, 5);
}

TEST(Propagation, ValidatesInputs) {
    const FeatureMap f = testing::orthogonal_cell_features(3, 3);
    const std::vector<FeatureMap> frames(2, f);
    EXPECT_THROW(propagate_labels(frames, LabelMask::one_hot(HardMask(2, 3), 2), {}), ValidationError);
    PropagationConfig bad;
    bad.temperature = 0.0;
    EXPECT_THROW(propagate_labels(frames, LabelMask::one_hot(HardMask(3, 3), 2), bad), ValidationError);
    const std::vector<FeatureMap> mixed = {f, testing::orthogonal_cell_features(3, 4)};
    EXPECT_THROW(propagate_labels(mixed, LabelMask::one_hot(HardMask(3, 3), 2), {}), ValidationError);
}

TEST(Propagation, ContextIndices) {
    EXPECT_EQ(context_indices(1, 28), (std::vector<int>{0}));
    EXPECT_EQ(context_indices(5, 2), (std::vector<int>{0, 3, 4}));
    EXPECT_EQ(context_indices(3, 0), (std::vector<int>{0}));
    EXPECT_EQ(context_indices(4, 10), (std::vector<int>{0, 1, 2, 3}));
}

TEST(Davis, ScoredFrames) {
    EXPECT_EQ(scored_frames(1), (std::vector<std::size_t>{}));
    EXPECT_EQ(scored_frames(2), (std::vector<std::size_t>{1}));
    EXPECT_EQ(scored_frames(5), (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Davis, ScoreVideoAveragesFramesThenObjects) {
    const HardMask gt = rect_mask({4, 4}, 0, 0, 2, 4);
    HardMask half = rect_mask({4, 4}, 0, 0, 1, 4);
    const std::vector<HardMask> pred = {gt, gt, half, gt};
    const std::vector<std::optional<HardMask>> truth = {gt, gt, gt, std::nullopt};
    const auto s = score_video("v", pred, truth, 1.0);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].frames, 2u);  // frame 3 is last, frame 0 is the seed
    EXPECT_DOUBLE_EQ(s[0].J, (1.0 + 0.5) / 2.0);
    const auto r = summarize_objects(s, 1);
    EXPECT_DOUBLE_EQ(r.JF_mean, (r.J_mean + r.F_mean) / 2.0);
    EXPECT_THROW(summarize_objects({}, 0), ValidationError);
}

TEST(Davis, StaticToyVideoScoresPerfectly) {
    const ImageRef img = testing::textured_image(32, 32, 9, "frame");
    const HardMask gt = rect_mask({32, 32}, 8, 12, 24, 28);
    VideoSequence v;
    v.name = "static";
    for (int k = 0; k < 14; ++k) {
        v.frames.push_back("f" + std::to_string(k));
        v.masks.push_back("m" + std::to_string(k));
    }
    const auto backend = make_toy_backend();
    ExtractionConfig cfg;
    cfg.t = 0;
    cfg.block_index = 0;
    cfg.ensemble_size = 1;
    const std::vector<VideoSequence> videos = {v};
    // Neighbouring toy cells are nearly parallel; a sharp softmax keeps the
    // exact self match dominant.
    DavisOptions options;
    options.propagation.temperature = 1e-3;
    const auto r = evaluate_davis(
        *backend, videos, [&](const std::string&) { return img; }, [&](const std::string&) { return gt; }, cfg,
        options);
    EXPECT_EQ(r.J_mean, 1.0);
    EXPECT_EQ(r.F_mean, 1.0);
    EXPECT_EQ(r.videos, 1u);
}

TEST(Davis, LoaderPairsFramesWithAnnotations) {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "dift_davis_layout";
    fs::remove_all(root);
    fs::create_directories(root / "JPEGImages/480p/cows");
    fs::create_directories(root / "Annotations/480p/cows");
    for (const char* f : {"00000", "00001", "00002"}) std::ofstream(root / "JPEGImages/480p/cows" / (std::string(f) + ".jpg")) << "x";
    for (const char* f : {"00000", "00002"}) std::ofstream(root / "Annotations/480p/cows" / (std::string(f) + ".png")) << "x";
    const auto videos = load_davis(root);
    ASSERT_EQ(videos.size(), 1u);
    EXPECT_EQ(videos[0].frames.size(), 3u);
    EXPECT_TRUE(videos[0].masks[1].empty());
    EXPECT_FALSE(videos[0].masks[2].empty());
    std::ofstream(root / "val.txt") << "cows\nmissing\n";
    EXPECT_THROW(load_davis(root, "480p", root / "val.txt"), NotFoundError);
    fs::remove_all(root);
}

TEST(Pose, ManifestParsing) {
    std::istringstream in(
        "{\"name\": \"run\", \"frames\": [\"a.png\", \"b.png\"], \"keypoints\": [[[1, 2], [3, 4]], [[5, 6], [7, 8]]]}\n"
        "\n"
        "{\"frames\": [\"c.png\"], \"keypoints\": [[[0, 0]]]}\n");
    const auto v = parse_pose_manifest(in);
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[0].keypoints[1][0], (Point2D{5, 6}));
    EXPECT_EQ(v[1].name, "3");
    std::istringstream bad("{\"frames\": [\"a\", \"b\"], \"keypoints\": [[[1, 2]], [[1, 2], [3, 4]]]}\n");
    EXPECT_THROW(parse_pose_manifest(bad), ValidationError);
}

TEST(Pose, StaticToyVideoHasPerfectPck) {
    const ImageRef img = testing::textured_image(32, 32, 10, "frame");
    PoseVideo v;
    v.name = "still";
    const std::vector<Point2D> joints = {{8.5, 8.5}, {20.5, 12.5}, {14.5, 26.5}};
    for (int k = 0; k < 5; ++k) {
        v.frames.push_back("f" + std::to_string(k));
        v.keypoints.push_back(joints);
    }
    const auto backend = make_toy_backend();
    ExtractionConfig cfg;
    cfg.t = 0;
    cfg.block_index = 0;
    cfg.ensemble_size = 1;
    const std::vector<PoseVideo> videos = {v};
    const auto r = evaluate_jhmdb(*backend, videos, [&](const std::string&) { return img; }, cfg, JhmdbOptions{});
    EXPECT_EQ(r.keypoints, 12u);
    EXPECT_EQ(r.pck.at(0.1), 1.0);
    EXPECT_EQ(r.pck.at(0.2), 1.0);
}

}  // namespace
}  // namespace dift
