#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dift/core/coords.hpp"
#include "dift/core/errors.hpp"
#include "dift/matching/matching.hpp"
#include "synthetic.hpp"

namespace dift {
namespace {

FeatureMap grid_of(int h, int w, const std::vector<std::vector<float>>& cells, Dims source = {}) {
    const int c = static_cast<int>(cells.front().size());
    Tensor3<float> t(c, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int k = 0; k < c; ++k) t(k, y, x) = cells[static_cast<std::size_t>(y * w + x)][k];
        }
    }
    if (source.height == 0) source = {h, w};
    return FeatureMap(std::move(t), source);
}

// Independent cosine: accumulate in long double.
double oracle_cosine(const std::vector<float>& u, const std::vector<float>& v) {
    long double dot = 0, nu = 0, nv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += static_cast<long double>(u[i]) * v[i];
        nu += static_cast<long double>(u[i]) * u[i];
        nv += static_cast<long double>(v[i]) * v[i];
    }
    return static_cast<double>(dot / std::sqrt(nu * nv));
}

TEST(FeatureAt, ExactAtCellCenter) {
    std::mt19937_64 rng(1);
    const auto f = testing::random_features(4, 3, 5, rng, {12, 20});
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 5; ++x) {
            const Point2D p = cell_center_pixel(y, x, {12, 20}, {3, 5});
            EXPECT_EQ(feature_at(f, p), f.cell(y, x));
        }
    }
}

TEST(FeatureAt, MidpointIsMean) {
    const auto f = grid_of(1, 2, {{1.0f, 0.0f}, {0.0f, 3.0f}}, {1, 4});
    // Cell centers at x = 0.5 and 2.5.
    const auto v = feature_at(f, {1.5, 0});
    EXPECT_FLOAT_EQ(v[0], 0.5f);
    EXPECT_FLOAT_EQ(v[1], 1.5f);
}

TEST(FeatureAt, HandComputedBilinearOnThreeByThree) {
    std::vector<std::vector<float>> cells;
    for (int i = 0; i < 9; ++i) cells.push_back({static_cast<float>(i * i), static_cast<float>(10 - i)});
    const auto f = grid_of(3, 3, cells);  // source == grid, so pixel == grid coords
    const Point2D p{0.25, 1.6};
    // Corners (row, col): (1,0)=3, (1,1)=4, (2,0)=6, (2,1)=7; ax = 0.25, ay = 0.6.
    const double c0 = 0.4 * (0.75 * 9 + 0.25 * 16) + 0.6 * (0.75 * 36 + 0.25 * 49);
    const double c1 = 0.4 * (0.75 * 7 + 0.25 * 6) + 0.6 * (0.75 * 4 + 0.25 * 3);
    const auto v = feature_at(f, p);
    EXPECT_NEAR(v[0], c0, 1e-5);
    EXPECT_NEAR(v[1], c1, 1e-5);
}

TEST(FeatureAt, ClampsPastOuterCenters) {
    const auto f = grid_of(1, 2, {{1.0f}, {5.0f}}, {1, 4});
    EXPECT_FLOAT_EQ(feature_at(f, {0, 0})[0], 1.0f);
    EXPECT_FLOAT_EQ(feature_at(f, {3, 0})[0], 5.0f);
}

TEST(FeatureAt, RejectsInvalidPoint) {
    const auto f = grid_of(1, 1, {{1.0f}}, {4, 4});
    EXPECT_THROW(feature_at(f, {4, 0}), ValidationError);
    EXPECT_THROW(feature_at(f, {0, -1}), ValidationError);
}

TEST(Cosine, Examples) {
    const std::vector<float> u = {1, 0};
    const std::vector<float> v = {1, 1};
    const std::vector<float> w = {0, 2};
    EXPECT_NEAR(cosine_similarity(u, u), 1.0, 1e-15);
    EXPECT_NEAR(cosine_similarity(u, w), 0.0, 1e-15);
    EXPECT_NEAR(cosine_similarity(u, v), std::sqrt(2.0) / 2, 1e-12);
}

TEST(Cosine, ZeroNormAndSizeMismatchAreErrors) {
    const std::vector<float> z = {0, 0};
    const std::vector<float> u = {1, 0};
    const std::vector<float> s = {1};
    EXPECT_THROW(cosine_similarity(z, u), ValidationError);
    EXPECT_THROW(cosine_similarity(u, s), ValidationError);
}

TEST(Cosine, ScaleInvariance) {
    std::mt19937_64 rng(4);
    std::normal_distribution<float> n;
    std::uniform_real_distribution<float> pos(0.01f, 100.0f);
    for (int i = 0; i < 100; ++i) {
        std::vector<float> u(16), v(16);
        for (auto& x : u) x = n(rng);
        for (auto& x : v) x = n(rng);
        const float a = pos(rng);
        const float b = pos(rng);
        std::vector<float> au(u), bv(v);
        for (auto& x : au) x *= a;
        for (auto& x : bv) x *= b;
        EXPECT_NEAR(cosine_similarity(au, bv), cosine_similarity(u, v), 1e-6);
    }
}

TEST(BestMatch, SelfMatchingIdentity) {
    const auto f = testing::orthogonal_cell_features(4, 6, {16, 24});
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 6; ++x) {
            const Point2D p = cell_center_pixel(y, x, {16, 24}, {4, 6});
            const auto m = best_match(f, p, f);
            EXPECT_EQ(m.match.target_point, p);
            EXPECT_NEAR(m.match.similarity, 1.0, 1e-12);
        }
    }
}

TEST(BestMatch, TwoByTwoEnumeration) {
    const auto target = grid_of(2, 2, {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
    const auto source = grid_of(1, 1, {{0, 0, 2, 0}});
    const auto m = best_match(source, {0, 0}, target);
    EXPECT_EQ(m.map.argmax_row, 1);
    EXPECT_EQ(m.map.argmax_col, 0);
    EXPECT_EQ(m.match.target_point, (Point2D{0, 1}));
    EXPECT_DOUBLE_EQ(m.match.similarity, 1.0);
}

TEST(BestMatch, TiesGoToSmallestRowMajorIndex) {
    const auto target = grid_of(2, 2, {{0, 1}, {1, 0}, {1, 0}, {0, 1}});
    const auto source = grid_of(1, 1, {{1, 0}});
    const auto m = best_match(source, {0, 0}, target);
    EXPECT_EQ(m.map.argmax_row, 0);
    EXPECT_EQ(m.map.argmax_col, 1);
}

TEST(BestMatch, MapIsConsistentAndMatchesBruteForce) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 100; ++i) {
        const auto src = testing::random_features(16, 8, 8, rng, {32, 32});
        const auto tgt = testing::random_features(16, 8, 8, rng, {24, 40});
        std::uniform_real_distribution<double> u(0.0, 31.0);
        const Point2D p{u(rng), u(rng)};
        const auto m = best_match(src, p, tgt);
        EXPECT_EQ(m.map.max(), m.match.similarity);
        const auto q = feature_at(src, p);
        int best = -1;
        double best_sim = -2;
        for (int k = 0; k < 64; ++k) {
            const double s = oracle_cosine(q, tgt.cell(k / 8, k % 8));
            EXPECT_NEAR(m.map.values[static_cast<std::size_t>(k)], s, 1e-9);
            if (s > best_sim + 1e-12) {
                best_sim = s;
                best = k;
            }
        }
        EXPECT_EQ(m.map.argmax_row * 8 + m.map.argmax_col, best);
        EXPECT_EQ(m.match.target_point, cell_center_pixel(best / 8, best % 8, {24, 40}, {8, 8}));
    }
}

TEST(BestMatch, PixelResolutionSearchesEveryPixel) {
    const auto f = testing::orthogonal_cell_features(2, 2, {4, 4});
    const Point2D p = cell_center_pixel(1, 1, {4, 4}, {2, 2});
    const auto m = best_match(f, p, f, MatchResolution::pixel);
    EXPECT_EQ(m.map.height, 4);
    EXPECT_EQ(m.map.width, 4);
    EXPECT_NEAR(m.match.similarity, 1.0, 1e-9);
    // The cell center (2.5, 2.5) is not a pixel; (3, 3) is the only pixel
    // whose clamped grid coordinate lands exactly on cell (1, 1).
    EXPECT_EQ(m.match.target_point, (Point2D{3, 3}));
}

TEST(BestMatch, ZeroQueryIsError) {
    const auto src = grid_of(1, 1, {{0, 0}});
    const auto tgt = grid_of(1, 1, {{1, 0}});
    EXPECT_THROW(best_match(src, {0, 0}, tgt), ValidationError);
}

TEST(MutualNN, IdentityOnIdenticalInputs) {
    const auto f = testing::orthogonal_cell_features(3, 3, {9, 9});
    std::vector<Point2D> kp;
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 3; ++x) kp.push_back(cell_center_pixel(y, x, {9, 9}, {3, 3}));
    }
    const auto m = mutual_nn_matches(f, f, kp, kp);
    ASSERT_EQ(m.size(), kp.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        EXPECT_EQ(m[i].source_index, i);
        EXPECT_EQ(m[i].target_index, i);
    }
}

TEST(MutualNN, OneSidedBestIsExcluded) {
    // Source 0 likes target 0 best, but target 0 likes source 1 best.
    const std::vector<std::vector<float>> src = {{1.0f, 0.3f}, {1.0f, 0.0f}};
    const std::vector<std::vector<float>> tgt = {{1.0f, 0.05f}, {0.0f, 1.0f}};
    const auto m = mutual_nn_matches(src, tgt);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].source_index, 1u);
    EXPECT_EQ(m[0].target_index, 0u);
}

std::vector<MutualMatch> brute_mutual(const std::vector<std::vector<float>>& a,
                                      const std::vector<std::vector<float>>& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::vector<double>> s(n, std::vector<double>(m));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) s[i][j] = oracle_cosine(a[i], b[j]);
    }
    std::vector<MutualMatch> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t bj = 0;
        for (std::size_t j = 1; j < m; ++j) {
            if (s[i][j] > s[i][bj]) bj = j;
        }
        std::size_t bi = 0;
        for (std::size_t k = 1; k < n; ++k) {
            if (s[k][bj] > s[bi][bj]) bi = k;
        }
        if (bi == i) out.push_back({i, bj, s[i][bj]});
    }
    return out;
}

TEST(MutualNN, MatchesBruteForceAndIsSymmetric) {
    std::mt19937_64 rng(8);
    std::normal_distribution<float> n;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<float>> a(3 + trial % 7, std::vector<float>(5));
        std::vector<std::vector<float>> b(2 + trial % 5, std::vector<float>(5));
        for (auto& r : a) {
            for (auto& x : r) x = n(rng);
        }
        for (auto& r : b) {
            for (auto& x : r) x = n(rng);
        }
        const auto got = mutual_nn_matches(a, b);
        const auto want = brute_mutual(a, b);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].source_index, want[i].source_index);
            EXPECT_EQ(got[i].target_index, want[i].target_index);
            EXPECT_NEAR(got[i].similarity, want[i].similarity, 1e-9);
        }
        auto swapped = mutual_nn_matches(b, a);
        ASSERT_EQ(swapped.size(), got.size());
        std::sort(swapped.begin(), swapped.end(),
                  [](const MutualMatch& x, const MutualMatch& y) { return x.target_index < y.target_index; });
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(swapped[i].source_index, got[i].target_index);
            EXPECT_EQ(swapped[i].target_index, got[i].source_index);
        }
    }
}

TEST(TopK, QueryImageRanksFirst) {
    std::mt19937_64 rng(3);
    std::vector<FeatureMap> gallery;
    for (int i = 0; i < 4; ++i) gallery.push_back(testing::random_features(8, 5, 5, rng, {20, 20}));
    const BoundingBox box{8, 8, 11, 11};
    const auto q = region_descriptor(gallery[2], box);
    const auto hits = topk_patches(q, gallery, 5);
    ASSERT_EQ(hits.size(), 4u);  // one per image
    EXPECT_EQ(hits[0].gallery_index, 2u);
    EXPECT_NEAR(hits[0].similarity, 1.0, 1e-6);
    EXPECT_EQ(hits[0].row, 2);
    EXPECT_EQ(hits[0].col, 2);
    for (std::size_t i = 1; i < hits.size(); ++i) EXPECT_GE(hits[i - 1].similarity, hits[i].similarity);
}

TEST(TopK, FullRankingEqualsBruteForceSort) {
    std::mt19937_64 rng(5);
    std::vector<FeatureMap> gallery;
    for (int i = 0; i < 3; ++i) gallery.push_back(testing::random_features(6, 3, 4, rng));
    std::normal_distribution<float> n;
    std::vector<float> q(6);
    for (auto& x : q) x = n(rng);
    const auto hits = topk_patches(q, gallery, 36, false);
    struct Row {
        double s;
        std::size_t g;
        int idx;
    };
    std::vector<Row> all;
    for (std::size_t g = 0; g < 3; ++g) {
        for (int k = 0; k < 12; ++k) all.push_back({oracle_cosine(q, gallery[g].cell(k / 4, k % 4)), g, k});
    }
    std::sort(all.begin(), all.end(), [](const Row& a, const Row& b) {
        if (a.s != b.s) return a.s > b.s;
        if (a.g != b.g) return a.g < b.g;
        return a.idx < b.idx;
    });
    ASSERT_EQ(hits.size(), all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        EXPECT_EQ(hits[i].gallery_index, all[i].g);
        EXPECT_EQ(hits[i].row * 4 + hits[i].col, all[i].idx);
    }
}

TEST(TopK, FivePatchesByDefaultCallSite) {
    std::mt19937_64 rng(6);
    std::vector<FeatureMap> gallery;
    for (int i = 0; i < 8; ++i) gallery.push_back(testing::random_features(4, 2, 2, rng));
    const auto hits = topk_patches(gallery[0].cell(0, 0), gallery, 5);
    EXPECT_EQ(hits.size(), 5u);
    EXPECT_THROW(topk_patches(gallery[0].cell(0, 0), gallery, 0), ValidationError);
    EXPECT_THROW(topk_patches(gallery[0].cell(0, 0), std::span<const FeatureMap>{}, 1), ValidationError);
}

}  // namespace
}  // namespace dift
