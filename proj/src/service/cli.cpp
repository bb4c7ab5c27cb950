#include "dift/service/cli.hpp"

#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dift/core/errors.hpp"
#include "dift/diffusion/feature_cache.hpp"
#include "dift/matching/matching.hpp"
#include "dift/service/config.hpp"
#include "dift/service/image_io.hpp"
#include "dift/service/reports.hpp"
#include "dift/service/server.hpp"
#include "dift/service/session.hpp"

namespace dift {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string relative_id(const fs::path& root, const fs::path& path) {
    if (!root.empty() && path.is_absolute()) {
        const fs::path rel = path.lexically_relative(root);
        if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    }
    return path.generic_string();
}

fs::path resolve(const fs::path& root, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || root.empty() ? path : root / path;
}

}  // namespace

ImageProvider file_images(const fs::path& root, int max_side) {
    return [root, max_side](const std::string& p) {
        const fs::path path = resolve(root, p);
        return load_image(path, relative_id(root, path.is_absolute() ? path : fs::absolute(path)), max_side);
    };
}

MaskProvider file_masks(const fs::path& root) {
    return [root](const std::string& p) { return load_label_mask(resolve(root, p)); };
}

namespace {

// Options shared by every subcommand; only one subcommand runs per call.
struct Common {
    std::string config_file;
    std::string preset;
    std::string backend;
    std::string cache_dir;
    std::string report;
    int t = 0;
    int block = 0;
    int ensemble = 0;
    std::string prompt;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_file, "TOML config file")->check(CLI::ExistingFile);
    sub->add_option("--preset", c.preset, "named extraction preset (see GET /presets)");
    sub->add_option("--backend", c.backend, "'toy' or a denoiser sidecar URL");
    sub->add_option("--cache-dir", c.cache_dir, "feature cache directory (default: $DIFT_CACHE_DIR)");
    sub->add_option("--report", c.report, "write the JSON report here");
    sub->add_option("--t", c.t, "diffusion time step");
    sub->add_option("--block", c.block, "upsampling block index");
    sub->add_option("--prompt", c.prompt, "prompt template; [class] is replaced by the category");
    sub->add_option("--ensemble", c.ensemble, "noise draws averaged per image");
    sub->add_option("--seed", c.seed, "noise seed");
    sub->add_option("--threads", c.threads, "worker threads (0 = all cores)");
}

AppConfig build_config(const CLI::App& sub, const Common& c) {
    AppConfig cfg;
    if (!c.config_file.empty()) cfg = load_config(c.config_file, cfg);
    if (!c.preset.empty()) apply_preset(cfg, find_preset(cfg.presets, c.preset));
    if (sub.count("--backend")) cfg.backend = c.backend;
    if (sub.count("--cache-dir")) cfg.cache_dir = c.cache_dir;
    if (sub.count("--t")) cfg.extraction.t = c.t;
    if (sub.count("--block")) cfg.extraction.block_index = c.block;
    if (sub.count("--prompt")) cfg.extraction.prompt = c.prompt;
    if (sub.count("--ensemble")) cfg.extraction.ensemble_size = c.ensemble;
    if (sub.count("--seed")) cfg.extraction.rng_seed = c.seed;
    if (sub.count("--threads")) cfg.threads = c.threads;
    cfg.extraction.validate();
    return cfg;
}

void emit(const Common& c, std::ostream& out, const std::string& table, const json& report) {
    out << table;
    const std::string text = report.dump(2) + "\n";
    if (c.report.empty()) {
        out << '\n' << text;
        return;
    }
    std::ofstream f(c.report, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot write report " + c.report);
    f << text;
}

json report_header(const std::string& command, const FeatureBackend& backend, const AppConfig& cfg) {
    return {{"command", command}, {"backend", backend.id()}, {"extraction", extraction_json(cfg.extraction)}};
}

std::ifstream open_manifest(const std::string& manifest) {
    std::ifstream in(manifest);
    if (!in) throw NotFoundError("cannot open manifest " + manifest);
    return in;
}

std::vector<KeypointPair> read_pairs(const std::string& manifest) {
    std::ifstream in = open_manifest(manifest);
    return parse_pair_manifest(in);
}

fs::path root_for(const std::string& root, const std::string& manifest) {
    if (!root.empty()) return fs::absolute(root);
    return fs::absolute(fs::path(manifest)).parent_path();
}

struct SemanticArgs {
    std::string pairs;
    std::string root;
    double alpha = 0.1;
    std::string norm;
    std::string agg;
    std::string resolution;
    std::vector<int> t_grid;
    std::vector<int> blocks;
};

void add_semantic(CLI::App* sub, SemanticArgs& a, bool tuning) {
    sub->add_option("--pairs", a.pairs, "pair manifest (JSON lines)")->required()->check(CLI::ExistingFile);
    sub->add_option("--root", a.root, "image root (default: the manifest's directory)");
    sub->add_option("--alpha", a.alpha, "PCK threshold");
    sub->add_option("--norm", a.norm, "bbox | img");
    sub->add_option("--agg", a.agg, "point | image");
    sub->add_option("--resolution", a.resolution, "grid | pixel");
    if (tuning) {
        sub->add_option("--t-grid", a.t_grid, "candidate time steps")->delimiter(',');
        sub->add_option("--blocks", a.blocks, "candidate block indices")->delimiter(',');
    }
}

SemanticEvalOptions semantic_options(const CLI::App& sub, const SemanticArgs& a, const AppConfig& cfg,
                                     PckAggregation default_agg) {
    SemanticEvalOptions o = cfg.semantic;
    o.aggregation = default_agg;
    if (sub.count("--alpha")) o.alpha = a.alpha;
    if (!a.norm.empty()) o.norm = parse_pck_norm(a.norm);
    if (!a.agg.empty()) o.aggregation = parse_pck_aggregation(a.agg);
    if (!a.resolution.empty()) o.resolution = parse_resolution(a.resolution);
    o.threads = cfg.threads;
    return o;
}

json semantic_options_json(const SemanticEvalOptions& o) {
    return {{"alpha", o.alpha},
            {"norm", to_string(o.norm)},
            {"aggregation", to_string(o.aggregation)},
            {"resolution", to_string(o.resolution)}};
}

struct PropagationArgs {
    double temperature = 0;
    int radius = 0;
    int topk = 0;
    int context = 0;
};

void add_propagation(CLI::App* sub, PropagationArgs& p) {
    sub->add_option("--temperature", p.temperature, "softmax temperature");
    sub->add_option("--radius", p.radius, "propagation radius in feature cells");
    sub->add_option("--topk", p.topk, "labels kept per cell");
    sub->add_option("--context", p.context, "preceding frames used as context");
}

PropagationConfig propagation_from(const CLI::App& sub, const PropagationArgs& p, PropagationConfig base) {
    if (sub.count("--temperature")) base.temperature = p.temperature;
    if (sub.count("--radius")) base.radius = p.radius;
    if (sub.count("--topk")) base.top_k = p.topk;
    if (sub.count("--context")) base.context_frames = p.context;
    base.validate();
    return base;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Diffusion-feature correspondence toolkit", "dift"};
    app.require_subcommand(1);
    Common c;

    auto* extract = app.add_subcommand("extract", "extract a feature map and write it as a .dift file");
    std::string image, out_file;
    extract->add_option("--image", image, "input image")->required()->check(CLI::ExistingFile);
    extract->add_option("--out", out_file, "output feature file")->required();

    auto* match = app.add_subcommand("match", "find the corresponding target point of a source point");
    std::string source, target, resolution;
    std::vector<double> point;
    match->add_option("--source", source, "source image")->required()->check(CLI::ExistingFile);
    match->add_option("--target", target, "target image")->required()->check(CLI::ExistingFile);
    match->add_option("--point", point, "source point x,y")->required()->expected(2)->delimiter(',');
    match->add_option("--resolution", resolution, "grid | pixel");

    SemanticArgs sem;
    auto* spair = app.add_subcommand("eval-spair", "semantic PCK (default per-image, alpha_bbox)");
    add_semantic(spair, sem, false);
    auto* willow = app.add_subcommand("eval-willow", "semantic PCK (default per-point, alpha_bbox)");
    add_semantic(willow, sem, false);
    auto* tune = app.add_subcommand("tune", "grid search over time step and block on a tuning split");
    add_semantic(tune, sem, true);

    auto* cub = app.add_subcommand("eval-cub", "CUB PCK@alpha_img averaged over splits");
    std::string cub_manifest, cub_root;
    double cub_alpha = 0.1;
    cub->add_option("--manifest", cub_manifest, "CUB manifest (JSON lines)")->required()->check(CLI::ExistingFile);
    cub->add_option("--root", cub_root, "image root (default: the manifest's directory)");
    cub->add_option("--alpha", cub_alpha, "PCK threshold");

    auto* hp = app.add_subcommand("eval-hpatches", "homography accuracy on HPatches sequences");
    std::string hp_root;
    std::vector<double> eps;
    std::size_t max_kp = 0;
    double ransac_threshold = 0;
    int ransac_iters = 0;
    std::uint64_t ransac_seed = 0;
    hp->add_option("--root", hp_root, "directory of i_*/v_* sequences")->required()->check(CLI::ExistingDirectory);
    hp->add_option("--eps", eps, "corner-error thresholds in pixels")->delimiter(',');
    hp->add_option("--max-keypoints", max_kp, "keypoints per image");
    hp->add_option("--ransac-threshold", ransac_threshold, "inlier threshold in pixels");
    hp->add_option("--ransac-iters", ransac_iters, "RANSAC iterations");
    hp->add_option("--ransac-seed", ransac_seed, "run seed for per-pair RANSAC seeds");

    auto* davis = app.add_subcommand("eval-davis", "video label propagation, J&F");
    std::string davis_root, davis_res = "480p", davis_split;
    double contour_tol = 0;
    PropagationArgs dprop;
    davis->add_option("--root", davis_root, "DAVIS root")->required()->check(CLI::ExistingDirectory);
    davis->add_option("--davis-resolution", davis_res, "image subdirectory, e.g. 480p");
    davis->add_option("--split", davis_split, "file listing the videos to evaluate")->check(CLI::ExistingFile);
    davis->add_option("--contour-tolerance", contour_tol, "boundary tolerance in pixels (default 0.008 x diagonal)");
    add_propagation(davis, dprop);

    auto* jhmdb = app.add_subcommand("eval-jhmdb", "pose keypoint propagation, PCK");
    std::string jh_manifest, jh_root, pose_norm;
    std::vector<double> pose_alphas;
    PropagationArgs jprop;
    jhmdb->add_option("--manifest", jh_manifest, "pose manifest (JSON lines)")->required()->check(CLI::ExistingFile);
    jhmdb->add_option("--root", jh_root, "frame root (default: the manifest's directory)");
    jhmdb->add_option("--pose-norm", pose_norm, "bbox | frame");
    jhmdb->add_option("--alphas", pose_alphas, "PCK thresholds")->delimiter(',');
    add_propagation(jhmdb, jprop);

    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP API");
    std::string host;
    int port = 0;
    int max_side = 0;
    serve_cmd->add_option("--host", host, "bind address");
    serve_cmd->add_option("--port", port, "port");
    serve_cmd->add_option("--max-image-side", max_side, "largest accepted image side");

    for (auto* sub : app.get_subcommands({})) add_common(sub, c);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        AppConfig cfg = build_config(*sub, c);
        const std::string name = sub->get_name();

        if (name == "serve") {
            if (sub->count("--host")) cfg.service.host = host;
            if (sub->count("--port")) cfg.service.port = port;
            if (sub->count("--max-image-side")) cfg.service.max_image_side = max_side;
            auto session = std::make_shared<Session>(make_backend(cfg), cfg);
            return serve(session, err);
        }

        const auto backend = make_backend(cfg);
        backend->validate(cfg.extraction);
        json report = report_header(name, *backend, cfg);

        if (name == "extract") {
            const ImageRef img = load_image(image, fs::path(image).filename().string(), cfg.service.max_image_side);
            const FeatureMap f = backend->extract(img, cfg.extraction);
            write_feature_file(out_file, f);
            report["result"] = {{"image", img.id()},
                                {"output", out_file},
                                {"channels", f.channels()},
                                {"grid", {f.height(), f.width()}},
                                {"source", {img.height(), img.width()}}};
            std::ostringstream table;
            table << "wrote " << out_file << ": " << f.channels() << " x " << f.height() << " x " << f.width() << '\n';
            emit(c, out, table.str(), report);
            return kExitOk;
        }
        if (name == "match") {
            const ImageRef a = load_image(source, fs::path(source).filename().string(), cfg.service.max_image_side);
            const ImageRef b = load_image(target, fs::path(target).filename().string(), cfg.service.max_image_side);
            const Point2D p{point.at(0), point.at(1)};
            const MatchResolution res = resolution.empty() ? cfg.semantic.resolution : parse_resolution(resolution);
            const BestMatch m = best_match(backend->extract(a, cfg.extraction), p, backend->extract(b, cfg.extraction), res);
            report["result"] = {{"source_point", {p.x, p.y}},
                                {"target_point", {m.match.target_point.x, m.match.target_point.y}},
                                {"similarity", m.match.similarity},
                                {"resolution", to_string(res)}};
            std::ostringstream table;
            table << "(" << p.x << ", " << p.y << ") -> (" << m.match.target_point.x << ", " << m.match.target_point.y
                  << ")  similarity " << m.match.similarity << '\n';
            emit(c, out, table.str(), report);
            return kExitOk;
        }
        if (name == "eval-spair" || name == "eval-willow") {
            const auto opts = semantic_options(*sub, sem, cfg,
                                               name == "eval-spair" ? PckAggregation::per_image : PckAggregation::per_point);
            const auto pairs = read_pairs(sem.pairs);
            const auto eval = evaluate_dataset(*backend, pairs, file_images(root_for(sem.root, sem.pairs), cfg.service.max_image_side),
                                               cfg.extraction, opts);
            report["options"] = semantic_options_json(opts);
            report["result"] = pck_report_json(eval.report);
            emit(c, out, pck_table(eval.report), report);
            return kExitOk;
        }
        if (name == "tune") {
            const auto opts = semantic_options(*sub, sem, cfg, cfg.semantic.aggregation);
            const auto pairs = read_pairs(sem.pairs);
            std::vector<int> ts = sem.t_grid;
            if (ts.empty()) ts.assign(std::begin(kDefaultTimeStepGrid), std::end(kDefaultTimeStepGrid));
            std::vector<int> blocks = sem.blocks;
            if (blocks.empty()) {
                for (int n = 0; n < backend->client().num_blocks(); ++n) blocks.push_back(n);
            }
            const auto result = grid_search(*backend, pairs, file_images(root_for(sem.root, sem.pairs), cfg.service.max_image_side),
                                            cfg.extraction, ts, blocks, opts);
            report["options"] = semantic_options_json(opts);
            report["result"] = grid_search_json(result);
            emit(c, out, grid_search_table(result), report);
            return kExitOk;
        }
        if (name == "eval-cub") {
            std::ifstream in = open_manifest(cub_manifest);
            const auto images = parse_cub_manifest(in);
            const auto r = evaluate_cub(*backend, images, file_images(root_for(cub_root, cub_manifest), cfg.service.max_image_side),
                                        cfg.extraction, cub_alpha, cfg.threads);
            report["result"] = cub_report_json(r);
            emit(c, out, cub_table(r), report);
            return kExitOk;
        }
        if (name == "eval-hpatches") {
            HPatchesOptions o = cfg.geometric;
            if (!eps.empty()) o.epsilons = eps;
            if (sub->count("--max-keypoints")) o.max_keypoints = max_kp;
            if (sub->count("--ransac-threshold")) o.ransac_threshold_px = ransac_threshold;
            if (sub->count("--ransac-iters")) o.ransac_iters = ransac_iters;
            if (sub->count("--ransac-seed")) o.seed = ransac_seed;
            o.threads = cfg.threads;
            const fs::path root = fs::absolute(hp_root);
            const auto seqs = load_hpatches(root);
            const auto r = evaluate_hpatches(*backend, seqs, file_images(root, cfg.service.max_image_side),
                                             sidecar_keypoints(), cfg.extraction, o);
            report["options"] = {{"max_keypoints", o.max_keypoints},
                                 {"ransac_threshold", o.ransac_threshold_px},
                                 {"ransac_iters", o.ransac_iters},
                                 {"ransac_seed", o.seed}};
            report["result"] = hpatches_report_json(r);
            emit(c, out, hpatches_table(r), report);
            return kExitOk;
        }
        if (name == "eval-davis") {
            DavisOptions o;
            o.propagation = propagation_from(*sub, dprop, cfg.propagation);
            o.contour_tolerance = sub->count("--contour-tolerance") ? std::optional<double>(contour_tol) : cfg.contour_tolerance;
            o.threads = cfg.threads;
            const fs::path root = fs::absolute(davis_root);
            std::optional<fs::path> split;
            if (!davis_split.empty()) split = davis_split;
            const auto videos = load_davis(root, davis_res, split);
            const auto r = evaluate_davis(*backend, videos, file_images(root, cfg.service.max_image_side),
                                          file_masks(root), cfg.extraction, o);
            report["options"] = {{"propagation", propagation_json(o.propagation)},
                                 {"contour_tolerance", o.contour_tolerance ? json(*o.contour_tolerance) : json("auto")}};
            report["result"] = davis_report_json(r);
            emit(c, out, davis_table(r), report);
            return kExitOk;
        }
        if (name == "eval-jhmdb") {
            JhmdbOptions o;
            o.propagation = propagation_from(*sub, jprop, cfg.propagation);
            o.alphas = pose_alphas.empty() ? cfg.pose_alphas : pose_alphas;
            o.norm = pose_norm.empty() ? cfg.pose_norm : parse_pose_norm(pose_norm);
            o.threads = cfg.threads;
            std::ifstream in = open_manifest(jh_manifest);
            const auto videos = parse_pose_manifest(in);
            const auto r = evaluate_jhmdb(*backend, videos, file_images(root_for(jh_root, jh_manifest), cfg.service.max_image_side),
                                          cfg.extraction, o);
            report["options"] = {{"propagation", propagation_json(o.propagation)}, {"pose_norm", to_string(o.norm)}};
            report["result"] = jhmdb_report_json(r);
            emit(c, out, jhmdb_table(r), report);
            return kExitOk;
        }
        throw ValidationError("unknown subcommand " + name);
    } catch (const BackendError& e) {
        err << "backend error: " << e.what() << '\n';
        return kExitBackend;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}

}  // namespace dift
