#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "dift/core/errors.hpp"
#include "dift/diffusion/toy_backend.hpp"
#include "dift/edit/edit_prop.hpp"
#include "synthetic.hpp"

namespace dift {
namespace {

HardMask square_region(int side, int lo, int hi) {
    HardMask m(side, side);
    for (int y = lo; y < hi; ++y) {
        for (int x = lo; x < hi; ++x) m.at(y, x) = 1;
    }
    return m;
}

// Opaque red inside the region, transparent elsewhere.
EditLayer red_layer(const HardMask& region) {
    EditLayer e;
    e.region = region;
    e.rgba = {region.height(), region.width(),
              std::vector<float>(static_cast<std::size_t>(region.height()) * region.width() * 4, 0.0f)};
    for (int y = 0; y < region.height(); ++y) {
        for (int x = 0; x < region.width(); ++x) {
            if (region.at(y, x) == 0) continue;
            e.rgba.at(y, x, 0) = 1.0f;
            e.rgba.at(y, x, 3) = 1.0f;
        }
    }
    return e;
}

// Mean displacement of the region's bounding-box corners.
double region_corner_error(const Homography& a, const Homography& b, int lo, int hi) {
    const double l = lo;
    const double h = hi - 1;
    double err = 0.0;
    for (const Point2D c : {Point2D{l, l}, Point2D{h, l}, Point2D{l, h}, Point2D{h, h}}) {
        const Point2D p = apply_homography(a, c);
        const Point2D q = apply_homography(b, c);
        err += std::hypot(p.x - q.x, p.y - q.y) / 4.0;
    }
    return err;
}

ExtractionConfig edit_cfg(int block) {
    ExtractionConfig cfg;
    cfg.t = 0;
    cfg.block_index = block;
    cfg.ensemble_size = 1;
    return cfg;
}

TEST(RegionSampling, FullMaskQuadrants) {
    const auto pts = sample_region_points(HardMask(8, 8, 1), 4);
    // Stratum centers sit between pixels; the first nearest pixel wins.
    const std::vector<Point2D> expect = {{1, 1}, {5, 1}, {1, 5}, {5, 5}};
    EXPECT_EQ(pts, expect);
}

TEST(RegionSampling, Errors) {
    HardMask one(8, 8);
    one.at(3, 3) = 1;
    EXPECT_THROW(sample_region_points(one, 16), ValidationError);
    EXPECT_THROW(sample_region_points(HardMask(8, 8, 1), 3), ValidationError);
    EXPECT_THROW(sample_region_points(HardMask(8, 8), 16), ValidationError);
}

TEST(RegionSampling, BlobPointsAreDistinctInsideAndDeterministic) {
    HardMask disk(40, 50);
    for (int y = 0; y < 40; ++y) {
        for (int x = 0; x < 50; ++x) disk.at(y, x) = std::hypot(x - 30.0, y - 18.0) <= 12.0 ? 2 : 0;
    }
    const auto pts = sample_region_points(disk, 64);
    EXPECT_EQ(pts.size(), 64u);
    std::set<std::pair<double, double>> seen;
    for (const auto& p : pts) {
        EXPECT_NE(disk.at(static_cast<int>(p.y), static_cast<int>(p.x)), 0);
        seen.insert({p.x, p.y});
    }
    EXPECT_EQ(seen.size(), pts.size());
    EXPECT_EQ(sample_region_points(disk, 64), pts);
}

TEST(RegionSampling, SmallRegionYieldsFewerPoints) {
    const auto pts = sample_region_points(square_region(10, 2, 4), 64);
    EXPECT_EQ(pts.size(), 4u);
}

TEST(EditLayer, Validation) {
    EditLayer e = red_layer(square_region(8, 2, 5));
    EXPECT_NO_THROW(e.validate({8, 8}));
    EXPECT_THROW(e.validate({8, 9}), ValidationError);
    e.rgba.at(0, 0, 3) = 0.5f;
    EXPECT_THROW(e.validate({8, 8}), ValidationError);
    e.rgba.at(0, 0, 3) = 1.5f;
    EXPECT_THROW(e.rgba.validate(), ValidationError);
}

TEST(Compositing, IdentityWarpPremultiplies) {
    RgbaImage layer{1, 2, {0.8f, 0.4f, 0.2f, 0.5f, 1.0f, 1.0f, 1.0f, 0.0f}};
    const RgbaImage w = warp_premultiplied(layer, Homography(), {1, 2});
    EXPECT_FLOAT_EQ(w.at(0, 0, 0), 0.4f);
    EXPECT_FLOAT_EQ(w.at(0, 0, 1), 0.2f);
    EXPECT_FLOAT_EQ(w.at(0, 0, 3), 0.5f);
    EXPECT_FLOAT_EQ(w.at(0, 1, 0), 0.0f);
}

TEST(Compositing, TranslationMovesTheLayer) {
    const EditLayer e = red_layer(square_region(10, 2, 4));
    const RgbaImage w = warp_premultiplied(e.rgba, Homography::translation(3, 1), {10, 10});
    EXPECT_FLOAT_EQ(w.at(3, 5, 3), 1.0f);
    EXPECT_FLOAT_EQ(w.at(2, 2, 3), 0.0f);
}

TEST(Compositing, TransparentPixelsAreBitExact) {
    const ImageRef target = testing::textured_image(16, 16, 3);
    const EditLayer e = red_layer(square_region(16, 4, 8));
    RgbaImage pm = warp_premultiplied(e.rgba, Homography(), {16, 16});
    pm.at(10, 10, 0) = 0.25f;  // half-covered pixel: 0.25 + 0.5 * target
    pm.at(10, 10, 3) = 0.5f;
    const ImageRef out = composite_over(target, pm);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            for (int c = 0; c < 3; ++c) {
                if (pm.at(y, x, 3) == 0.0f) {
                    EXPECT_EQ(out.at(y, x, c), target.at(y, x, c));
                }
            }
        }
    }
    EXPECT_FLOAT_EQ(out.at(5, 5, 0), 1.0f);
    EXPECT_FLOAT_EQ(out.at(5, 5, 1), 0.0f);
    EXPECT_NEAR(out.at(10, 10, 0), 0.25 + 0.5 * target.at(10, 10, 0), 1e-6);
    EXPECT_NEAR(out.at(10, 10, 1), 0.5 * target.at(10, 10, 1), 1e-6);
    EXPECT_THROW(composite_over(testing::textured_image(8, 8, 3), pm), ValidationError);
}

TEST(PropagateEdit, SelfPropagationIsNearIdentity) {
    const auto backend = make_toy_backend();
    for (int block = 0; block < 3; ++block) {
        const ImageRef img = testing::textured_image(64, 64, 21);
        const EditLayer e = red_layer(square_region(64, 16, 48));
        const EditResult r = propagate_edit(img, e, img, *backend, edit_cfg(block));
        const double pitch = toy_block_stride(block);
        EXPECT_LT(mean_corner_error(r.homography, Homography(), {64, 64}), pitch) << "block " << block;
        EXPECT_EQ(r.diagnostics.matches.size(), 64u);
    }
}

TEST(PropagateEdit, SyntheticWarpRegistersWithinTwoPixels) {
    const auto backend = make_toy_backend();
    const int side = 96;
    for (int trial = 0; trial < 5; ++trial) {
        std::mt19937_64 rng(500 + trial);
        const ImageRef src = testing::textured_image(side, side, 77 + trial, "src");
        const Homography h = testing::random_homography(rng, {side, side});
        const ImageRef tgt = testing::warp_image(src, h, {side, side}, "tgt");
        const EditLayer e = red_layer(square_region(side, side / 4, 3 * side / 4));
        const EditResult r = propagate_edit(src, e, tgt, *backend, edit_cfg(0));
        EXPECT_LE(region_corner_error(r.homography, h, side / 4, 3 * side / 4), 2.0) << "trial " << trial;
        // The composite is red where the warped region lands.
        const Point2D c = apply_homography(h, {side / 2.0, side / 2.0});
        EXPECT_FLOAT_EQ(r.composite.at(static_cast<int>(c.y), static_cast<int>(c.x), 0), 1.0f);
    }
}

TEST(PropagateEdit, Deterministic) {
    const auto backend = make_toy_backend();
    std::mt19937_64 rng(1);
    const ImageRef src = testing::textured_image(64, 64, 5, "src");
    const ImageRef tgt = testing::warp_image(src, testing::random_homography(rng, {64, 64}), {64, 64}, "tgt");
    const EditLayer e = red_layer(square_region(64, 16, 48));
    const EditResult a = propagate_edit(src, e, tgt, *backend, edit_cfg(0));
    const EditResult b = propagate_edit(src, e, tgt, *backend, edit_cfg(0));
    EXPECT_EQ(a.homography.row_major(), b.homography.row_major());
    EXPECT_EQ(a.composite.pixels().size(), b.composite.pixels().size());
    EXPECT_TRUE(std::equal(a.composite.pixels().begin(), a.composite.pixels().end(), b.composite.pixels().begin()));
    EXPECT_EQ(a.diagnostics.inliers, b.diagnostics.inliers);
}

TEST(PropagateEdit, QuantileFilterDropsWeakMatches) {
    const auto backend = make_toy_backend();
    const ImageRef img = testing::textured_image(64, 64, 8);
    const EditLayer e = red_layer(square_region(64, 8, 56));
    EditConfig opt;
    opt.drop_quantile = 0.5;
    const EditResult r = propagate_edit(img, e, img, *backend, edit_cfg(0), opt);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < r.diagnostics.matches.size(); ++i) {
        kept += r.diagnostics.kept[i] ? 1 : 0;
        EXPECT_EQ(r.diagnostics.kept[i], r.diagnostics.matches[i].similarity >= r.diagnostics.similarity_floor);
        if (!r.diagnostics.kept[i]) {
            EXPECT_FALSE(r.diagnostics.inliers[i]);
        }
    }
    EXPECT_GE(kept, r.diagnostics.matches.size() / 2);
    opt.drop_quantile = 1.0;
    EXPECT_THROW(propagate_edit(img, e, img, *backend, edit_cfg(0), opt), ValidationError);
}

TEST(PropagateEdit, FailureCarriesDiagnostics) {
    const auto backend = make_toy_backend();
    const ImageRef img = testing::textured_image(32, 32, 2);
    HardMask line(32, 32);
    for (int x = 4; x < 28; ++x) line.at(10, x) = 1;  // collinear samples
    try {
        propagate_edit(img, red_layer(line), img, *backend, edit_cfg(0));
        FAIL() << "a collinear region cannot support a homography";
    } catch (const EditPropagationError& e) {
        EXPECT_FALSE(e.diagnostics().matches.empty());
        EXPECT_EQ(e.diagnostics().kept.size(), e.diagnostics().matches.size());
        for (const auto& m : e.diagnostics().matches) EXPECT_EQ(m.source_point.y, 10.0);
    }
}

}  // namespace
}  // namespace dift
