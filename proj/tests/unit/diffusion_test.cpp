#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "dift/core/errors.hpp"
#include "dift/diffusion/backend.hpp"
#include "dift/diffusion/extractor.hpp"
#include "dift/diffusion/feature_cache.hpp"
#include "dift/diffusion/schedule.hpp"
#include "dift/diffusion/toy_backend.hpp"
#include "synthetic.hpp"

namespace dift {
namespace {

namespace fs = std::filesystem;

Tensor3<double> random_tensor(std::mt19937_64& rng, int c, int h, int w) {
    std::normal_distribution<double> n;
    Tensor3<double> t(c, h, w);
    for (auto& v : t.values()) v = n(rng);
    return t;
}

TEST(Schedule, LinearHasThousandStrictlyDecreasingSteps) {
    const auto s = NoiseSchedule::linear();
    ASSERT_EQ(s.steps(), 1000);
    EXPECT_NEAR(s.alpha_bar(0), 1.0 - 1e-4, 1e-15);
    EXPECT_LE(s.alpha_bar(0), 1.0);
    for (int t = 1; t < s.steps(); ++t) EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
    EXPECT_GT(s.alpha_bar(999), 0.0);
    const auto sd = NoiseSchedule::scaled_linear();
    EXPECT_EQ(sd.steps(), 1000);
    EXPECT_NEAR(sd.alpha_bar(0), 1.0 - 0.00085, 1e-12);
}

TEST(Schedule, RejectsInvalidValues) {
    EXPECT_THROW(NoiseSchedule({0.9, 0.9}), ValidationError);
    EXPECT_THROW(NoiseSchedule({1.1, 0.5}), ValidationError);
    EXPECT_THROW(NoiseSchedule({0.5, 0.0}), ValidationError);
    EXPECT_THROW(NoiseSchedule({}), ValidationError);
    EXPECT_THROW(NoiseSchedule::linear().alpha_bar(1000), ValidationError);
}

TEST(AddNoise, HandEvaluated) {
    const NoiseSchedule s({1.0, 0.64});
    const Tensor3<double> x0(1, 1, 1, 1.0);
    const Tensor3<double> eps(1, 1, 1, 0.5);
    EXPECT_NEAR(add_noise(x0, 1, eps, s)(0, 0, 0), 1.1, 1e-15);
}

TEST(AddNoise, ZeroNoiseAndZeroSignalAreExact) {
    std::mt19937_64 rng(3);
    const auto& s = toy_schedule();
    const auto x0 = random_tensor(rng, 3, 4, 5);
    const auto eps = random_tensor(rng, 3, 4, 5);
    const Tensor3<double> zero(3, 4, 5, 0.0);
    for (int t : {0, 1, 500, 999}) {
        const double a = s.alpha_bar(t);
        const auto no_noise = add_noise(x0, t, zero, s);
        const auto no_signal = add_noise(zero, t, eps, s);
        for (std::size_t i = 0; i < x0.size(); ++i) {
            EXPECT_EQ(no_noise.values()[i], std::sqrt(a) * x0.values()[i]);
            EXPECT_EQ(no_signal.values()[i], std::sqrt(1.0 - a) * eps.values()[i]);
        }
    }
}

TEST(AddNoise, Superposition) {
    std::mt19937_64 rng(11);
    const auto& s = toy_schedule();
    for (int trial = 0; trial < 20; ++trial) {
        const auto x1 = random_tensor(rng, 2, 3, 3);
        const auto x2 = random_tensor(rng, 2, 3, 3);
        const auto e1 = random_tensor(rng, 2, 3, 3);
        const auto e2 = random_tensor(rng, 2, 3, 3);
        Tensor3<double> xs(2, 3, 3);
        Tensor3<double> es(2, 3, 3);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            xs.values()[i] = x1.values()[i] + 2.0 * x2.values()[i];
            es.values()[i] = e1.values()[i] + 2.0 * e2.values()[i];
        }
        const int t = trial * 47;
        const auto a = add_noise(x1, t, e1, s);
        const auto b = add_noise(x2, t, e2, s);
        const auto c = add_noise(xs, t, es, s);
        for (std::size_t i = 0; i < c.size(); ++i) {
            EXPECT_NEAR(c.values()[i], a.values()[i] + 2.0 * b.values()[i], 1e-9);
        }
    }
}

TEST(AddNoise, SignalToNoiseDecreasesWithT) {
    const auto& s = toy_schedule();
    double prev = std::numeric_limits<double>::infinity();
    for (int t = 0; t < s.steps(); ++t) {
        const double snr = std::sqrt(s.alpha_bar(t)) / std::sqrt(1.0 - s.alpha_bar(t));
        EXPECT_LT(snr, prev);
        prev = snr;
    }
}

TEST(AddNoise, Errors) {
    const auto& s = toy_schedule();
    EXPECT_THROW(add_noise(Tensor3<double>(1, 2, 2), 0, Tensor3<double>(1, 2, 3), s), ValidationError);
    EXPECT_THROW(add_noise(Tensor3<double>(1, 2, 2), -1, Tensor3<double>(1, 2, 2), s), ValidationError);
    EXPECT_THROW(add_noise(Tensor3<double>(1, 2, 2), 1000, Tensor3<double>(1, 2, 2), s), ValidationError);
}

TEST(ExtractionConfig, Defaults) {
    const ExtractionConfig cfg;
    EXPECT_EQ(cfg.ensemble_size, 8);
    EXPECT_EQ(cfg.t, 261);
    EXPECT_EQ(cfg.block_index, 1);
}

TEST(ExtractionConfig, RenderPrompt) {
    EXPECT_EQ(render_prompt("a photo of a [class]", "cat"), "a photo of a cat");
    EXPECT_EQ(render_prompt("", "cat"), "");
    EXPECT_EQ(render_prompt("[class] and [class]", "dog"), "dog and dog");
    EXPECT_EQ(render_prompt("no slot", "dog"), "no slot");
}

TEST(ExtractionConfig, ValidateForClient) {
    const ToyDenoiser toy;
    ExtractionConfig cfg;
    cfg.block_index = kToyBlocks;
    EXPECT_THROW(validate_for_client(cfg, toy), ValidationError);
    cfg.block_index = 0;
    cfg.t = 1000;
    EXPECT_THROW(validate_for_client(cfg, toy), ValidationError);
    cfg.t = 0;
    cfg.ensemble_size = 0;
    EXPECT_THROW(validate_for_client(cfg, toy), ValidationError);
}

TEST(Toy, GridDimsFollowStride) {
    EXPECT_EQ(toy_block_stride(0), 2);
    EXPECT_EQ(toy_block_stride(3), 16);
    EXPECT_EQ(toy_grid_dims({64, 48}, 1), (Dims{16, 12}));
    EXPECT_EQ(toy_grid_dims({3, 3}, 3), (Dims{1, 1}));
    EXPECT_THROW(toy_block_stride(4), ValidationError);
}

TEST(Toy, Deterministic) {
    const auto img = testing::textured_image(32, 32, 1);
    ExtractionConfig cfg;
    cfg.block_index = 0;
    cfg.ensemble_size = 1;
    cfg.rng_seed = 5;
    EXPECT_EQ(toy_extract(img, cfg), toy_extract(img, cfg));
}

TEST(Toy, ClientPathEqualsDirectPath) {
    const auto img = testing::textured_image(24, 40, 2);
    const ToyDenoiser client;
    for (int block = 0; block < kToyBlocks; ++block) {
        ExtractionConfig cfg;
        cfg.t = 261;
        cfg.block_index = block;
        cfg.ensemble_size = 3;
        cfg.rng_seed = 17;
        EXPECT_EQ(extract_dift(img, client, cfg), toy_extract(img, cfg));
    }
}

TEST(Toy, EnsembleIsMeanOfSingleDraws) {
    const auto img = testing::textured_image(16, 16, 3);
    const ToyDenoiser client;
    ExtractionConfig cfg;
    cfg.t = 400;
    cfg.block_index = 1;
    cfg.ensemble_size = 8;
    cfg.rng_seed = 21;
    const FeatureMap mean = extract_dift(img, client, cfg);

    // Oracle: run each draw separately with its derived seed.
    const Tensor3<double> latent = client.encode(img);
    std::vector<double> sum(mean.data().size(), 0.0);
    for (int d = 0; d < cfg.ensemble_size; ++d) {
        Tensor3<double> eps(latent.channels(), latent.height(), latent.width());
        fill_standard_normal(eps.values(), derive_seed(cfg.rng_seed, d));
        const auto blocks = client.forward(add_noise(latent, cfg.t, eps, client.schedule()), cfg.t, "");
        const auto& a = blocks[static_cast<std::size_t>(cfg.block_index)];
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += a.values()[i];
    }
    for (std::size_t i = 0; i < sum.size(); ++i) {
        EXPECT_FLOAT_EQ(mean.data().values()[i], static_cast<float>(sum[i] / cfg.ensemble_size));
    }
}

Activation noise_free(const ImageRef& img, int block) { return toy_block_activation(toy_encode(img), block); }

double linf(const Activation& a, const Activation& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a.values()[i]) - b.values()[i]));
    return m;
}

TEST(Toy, VanishingNoiseAtStepZero) {
    const auto img = testing::textured_image(32, 32, 4);
    ExtractionConfig cfg;
    cfg.t = 0;
    cfg.block_index = 0;
    cfg.ensemble_size = 1;
    const double ab = toy_schedule().alpha_bar(0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.rng_seed = seed;
        const auto eps = draw_noise(3, 32, 32, seed, 0);
        double max_eps = 0.0;
        for (double e : eps.values()) max_eps = std::max(max_eps, std::abs(e));
        // Latent perturbation bound (pixels in [0, 1] map to [-gain, gain]),
        // times the largest channel gain: a gradient is a difference of two
        // luminances, each a convex combination of latent values.
        const double latent_dev = (1.0 - std::sqrt(ab)) * kToyLatentGain + std::sqrt(1.0 - ab) * max_eps;
        const double bound = latent_dev * 2.0 * kToyGradientGain / kToyLatentGain;
        EXPECT_LE(linf(toy_extract(img, cfg).data(), noise_free(img, 0)), bound + 1e-6);
        EXPECT_LT(bound, 0.01);
    }
}

TEST(Toy, EnsembleConvergesToNoiseFreeDescriptor) {
    const auto img = testing::textured_image(32, 32, 5);
    ExtractionConfig cfg;
    cfg.t = 800;
    cfg.block_index = 0;
    double gap1 = 0.0;
    double gap64 = 0.0;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        cfg.rng_seed = seed;
        const double a = std::sqrt(toy_schedule().alpha_bar(cfg.t));
        // The expected descriptor scales the signal channels by sqrt(alpha_bar).
        Activation expected = noise_free(img, 0);
        for (int c = 0; c < 5; ++c) {
            for (int y = 0; y < expected.height(); ++y) {
                for (int x = 0; x < expected.width(); ++x) expected(c, y, x) = static_cast<float>(a * expected(c, y, x));
            }
        }
        cfg.ensemble_size = 1;
        gap1 += linf(toy_extract(img, cfg).data(), expected);
        cfg.ensemble_size = 64;
        gap64 += linf(toy_extract(img, cfg).data(), expected);
    }
    EXPECT_LT(gap64, gap1 / 4);
}

TEST(Toy, DistinctPatchesGiveDistinctDescriptors) {
    const auto img = testing::distinct_cell_image(32, 32, 2);
    ExtractionConfig cfg;
    cfg.t = 0;
    cfg.block_index = 0;
    cfg.ensemble_size = 1;
    const auto f = toy_extract(img, cfg);
    std::set<std::vector<float>> cells;
    for (int y = 0; y < f.height(); ++y) {
        for (int x = 0; x < f.width(); ++x) cells.insert(f.cell(y, x));
    }
    EXPECT_EQ(cells.size(), static_cast<std::size_t>(f.height() * f.width()));
}

class FailingClient : public DenoiserClient {
public:
    explicit FailingClient(int fail_draw, int blocks = 2) : fail_draw_(fail_draw), blocks_(blocks) {}
    std::string id() const override { return "failing"; }
    const NoiseSchedule& schedule() const override { return toy_schedule(); }
    int num_blocks() const override { return 2; }
    Tensor3<double> encode(const ImageRef& image) const override { return toy_encode(image); }
    std::vector<Activation> forward(const Tensor3<double>& noisy, int, const std::string&) const override {
        if (calls_++ == fail_draw_) throw std::runtime_error("device lost");
        std::vector<Activation> out;
        for (int b = 0; b < blocks_; ++b) out.push_back(toy_block_activation(noisy, 0));
        return out;
    }

private:
    int fail_draw_;
    int blocks_;
    mutable int calls_ = 0;
};

TEST(Extract, ClientFailureNamesTheDraw) {
    const auto img = testing::textured_image(8, 8, 6);
    ExtractionConfig cfg;
    cfg.block_index = 0;
    cfg.ensemble_size = 4;
    try {
        extract_dift(img, FailingClient(2), cfg);
        FAIL() << "expected BackendError";
    } catch (const BackendError& e) {
        EXPECT_NE(std::string(e.what()).find("draw 2"), std::string::npos) << e.what();
    }
}

TEST(Extract, MissingBlockIsBackendError) {
    const auto img = testing::textured_image(8, 8, 6);
    ExtractionConfig cfg;
    cfg.block_index = 1;
    cfg.ensemble_size = 1;
    EXPECT_THROW(extract_dift(img, FailingClient(-1, 1), cfg), BackendError);
}

TEST(FeatureFile, RoundTripIsBitIdentical) {
    std::mt19937_64 rng(9);
    const FeatureMap f = testing::random_features(5, 3, 7, rng, {12, 28});
    const FeatureMap g(f.data(), f.source_dims(), extraction_meta_json("toy-v1", ExtractionConfig{}));
    const std::string bytes = encode_feature_file(g);
    EXPECT_EQ(bytes.substr(0, 4), "DIFT");
    const FeatureMap back = decode_feature_file(bytes);
    EXPECT_EQ(back.data(), g.data());
    EXPECT_EQ(back.source_dims(), g.source_dims());
}

TEST(FeatureFile, RejectsCorruptInput) {
    std::mt19937_64 rng(9);
    const std::string bytes = encode_feature_file(testing::random_features(2, 2, 2, rng));
    EXPECT_THROW(decode_feature_file("NOPE" + bytes.substr(4)), DecodeError);
    EXPECT_THROW(decode_feature_file(bytes.substr(0, bytes.size() - 3)), DecodeError);
    EXPECT_THROW(decode_feature_file(""), DecodeError);
}

TEST(FeatureCache, KeyCoversEveryConfigField) {
    const auto img = testing::textured_image(8, 8, 1, "a");
    const ExtractionConfig base;
    std::set<std::string> keys;
    keys.insert(feature_cache_key(img, "toy-v1", base));
    keys.insert(feature_cache_key(img, "other", base));
    keys.insert(feature_cache_key(testing::textured_image(8, 8, 1, "b"), "toy-v1", base));
    keys.insert(feature_cache_key(testing::textured_image(8, 8, 2, "a"), "toy-v1", base));
    auto with = [&](auto mutate) {
        ExtractionConfig c = base;
        mutate(c);
        keys.insert(feature_cache_key(img, "toy-v1", c));
    };
    with([](ExtractionConfig& c) { c.t = 262; });
    with([](ExtractionConfig& c) { c.block_index = 2; });
    with([](ExtractionConfig& c) { c.prompt = "x"; });
    with([](ExtractionConfig& c) { c.ensemble_size = 4; });
    with([](ExtractionConfig& c) { c.rng_seed = 1; });
    EXPECT_EQ(keys.size(), 9u);
}

TEST(FeatureCache, GetAfterPutIsBitIdentical) {
    std::mt19937_64 rng(2);
    FeatureCache cache;
    const FeatureMap f = testing::random_features(3, 4, 4, rng);
    EXPECT_FALSE(cache.get("k").has_value());
    cache.put("k", f);
    EXPECT_EQ(cache.get("k").value(), f);
}

TEST(FeatureCache, EvictsOldestWhenFull) {
    std::mt19937_64 rng(2);
    FeatureCache cache(std::nullopt, 2);
    cache.put("a", testing::random_features(1, 1, 1, rng));
    cache.put("b", testing::random_features(1, 1, 1, rng));
    cache.put("c", testing::random_features(1, 1, 1, rng));
    EXPECT_EQ(cache.size(), 2u);
    EXPECT_FALSE(cache.get("a").has_value());
    EXPECT_TRUE(cache.get("c").has_value());
}

TEST(FeatureCache, DiskMirrorSurvivesNewInstance) {
    const fs::path dir = fs::temp_directory_path() / "dift_cache_test";
    fs::remove_all(dir);
    std::mt19937_64 rng(4);
    const FeatureMap f = testing::random_features(2, 3, 3, rng);
    {
        FeatureCache cache(dir);
        cache.put("abc", f);
    }
    FeatureCache fresh(dir);
    const auto hit = fresh.get("abc");
    ASSERT_TRUE(hit.has_value());
    EXPECT_EQ(hit->data(), f.data());
    fs::remove_all(dir);
}

TEST(FeatureBackend, CacheHitEqualsColdExtraction) {
    const auto img = testing::textured_image(16, 16, 8);
    ExtractionConfig cfg;
    cfg.block_index = 0;
    cfg.ensemble_size = 2;
    auto cache = std::make_shared<FeatureCache>();
    const auto backend = make_toy_backend(cache);
    const FeatureMap cold = backend->extract(img, cfg);
    EXPECT_EQ(cache->size(), 1u);
    const FeatureMap warm = backend->extract(img, cfg);
    EXPECT_EQ(warm, cold);
    EXPECT_EQ(cold, toy_extract(img, cfg));
}

}  // namespace
}  // namespace dift
