#include "dift/service/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "dift/core/errors.hpp"

namespace dift {
namespace {

constexpr std::string_view kBuiltinPresets = R"toml(
[preset.sd-semantic]
model = "sd"
task = "semantic"
t = 261
block_index = 1
prompt = "a photo of a [class]"
ensemble_size = 8

[preset.adm-semantic]
model = "adm"
task = "semantic"
t = 101
block_index = 4
prompt = ""
ensemble_size = 8

[preset.sd-hpatches]
model = "sd"
task = "geometric"
t = 0
block_index = 2
prompt = ""
ensemble_size = 8

[preset.adm-hpatches]
model = "adm"
task = "geometric"
t = 26
block_index = 11
prompt = ""
ensemble_size = 8

[preset.sd-davis]
model = "sd"
task = "temporal"
t = 51
block_index = 2
prompt = ""
ensemble_size = 8
temperature = 0.2
radius = 15
top_k = 15
context_frames = 28

[preset.adm-davis]
model = "adm"
task = "temporal"
t = 51
block_index = 7
prompt = ""
ensemble_size = 8
temperature = 0.1
radius = 15
top_k = 10
context_frames = 28

[preset.sd-jhmdb]
model = "sd"
task = "temporal"
t = 51
block_index = 2
prompt = ""
ensemble_size = 8
temperature = 0.1
radius = 5
top_k = 15
context_frames = 14

[preset.adm-jhmdb]
model = "adm"
task = "temporal"
t = 101
block_index = 5
prompt = ""
ensemble_size = 8
temperature = 0.2
radius = 5
top_k = 15
context_frames = 28
)toml";

toml::table parse_toml(std::string_view text) {
    try {
        return toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config parse error at line " << e.source().begin.line << ": " << e.description();
        throw ValidationError(msg.str());
    }
}

void reject_unknown(const toml::table& t, const std::string& section, std::initializer_list<std::string_view> keys) {
    const std::set<std::string_view> allowed(keys);
    for (const auto& [k, v] : t) {
        if (!allowed.count(k.str())) {
            throw ValidationError("unknown config key '" + std::string(k.str()) + "' in [" + section + "]");
        }
    }
}

template <typename T>
void read(const toml::table& t, std::string_view key, T& out) {
    const toml::node* n = t.get(key);
    if (!n) return;
    if constexpr (std::is_same_v<T, bool>) {
        if (auto v = n->value<bool>()) return void(out = *v);
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = n->value<std::string>()) return void(out = *v);
    } else if constexpr (std::is_floating_point_v<T>) {
        if (auto v = n->value<double>()) return void(out = static_cast<T>(*v));
    } else {
        if (auto v = n->value<std::int64_t>()) {
            if (*v < 0 && std::is_unsigned_v<T>) throw ValidationError("config key '" + std::string(key) + "' must be >= 0");
            return void(out = static_cast<T>(*v));
        }
    }
    throw ValidationError("config key '" + std::string(key) + "' has the wrong type");
}

std::vector<double> read_doubles(const toml::table& t, std::string_view key, std::vector<double> fallback) {
    const toml::node* n = t.get(key);
    if (!n) return fallback;
    const toml::array* arr = n->as_array();
    if (!arr) throw ValidationError("config key '" + std::string(key) + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *arr) {
        auto v = e.value<double>();
        if (!v) throw ValidationError("config key '" + std::string(key) + "' must be an array of numbers");
        out.push_back(*v);
    }
    return out;
}

const toml::table* section(const toml::table& root, std::string_view name) {
    const toml::node* n = root.get(name);
    if (!n) return nullptr;
    const toml::table* t = n->as_table();
    if (!t) throw ValidationError("config entry '" + std::string(name) + "' must be a table");
    return t;
}

Preset preset_from_table(const std::string& name, const toml::table& t) {
    reject_unknown(t, "preset." + name,
                   {"model", "task", "t", "block_index", "prompt", "ensemble_size", "temperature", "radius",
                    "top_k", "context_frames"});
    Preset p;
    p.name = name;
    read(t, "model", p.model);
    read(t, "task", p.task);
    read(t, "t", p.extraction.t);
    read(t, "block_index", p.extraction.block_index);
    read(t, "prompt", p.extraction.prompt);
    read(t, "ensemble_size", p.extraction.ensemble_size);
    p.extraction.validate();
    if (t.contains("temperature") || t.contains("radius") || t.contains("top_k") || t.contains("context_frames")) {
        PropagationConfig prop;
        read(t, "temperature", prop.temperature);
        read(t, "radius", prop.radius);
        read(t, "top_k", prop.top_k);
        read(t, "context_frames", prop.context_frames);
        prop.validate();
        p.propagation = prop;
    }
    return p;
}

std::vector<Preset> presets_from(const toml::table& root) {
    std::vector<Preset> out;
    const toml::table* presets = section(root, "preset");
    if (!presets) return out;
    for (const auto& [k, v] : *presets) {
        const toml::table* t = v.as_table();
        if (!t) throw ValidationError("preset '" + std::string(k.str()) + "' must be a table");
        out.push_back(preset_from_table(std::string(k.str()), *t));
    }
    return out;
}

}  // namespace

const std::vector<Preset>& builtin_presets() {
    static const std::vector<Preset> presets = [] {
        auto p = parse_presets(kBuiltinPresets);
        const std::vector<std::string> order = {"sd-semantic", "adm-semantic", "sd-hpatches", "adm-hpatches",
                                                "sd-davis",    "adm-davis",    "sd-jhmdb",    "adm-jhmdb"};
        std::vector<Preset> sorted;
        for (const auto& name : order) sorted.push_back(find_preset(p, name));
        return sorted;
    }();
    return presets;
}

std::vector<Preset> parse_presets(std::string_view toml_text) { return presets_from(parse_toml(toml_text)); }

const Preset& find_preset(std::span<const Preset> presets, const std::string& name) {
    for (const auto& p : presets) {
        if (p.name == name) return p;
    }
    throw ValidationError("unknown preset '" + name + "'");
}

PckNorm parse_pck_norm(const std::string& s) {
    if (s == "bbox") return PckNorm::bbox;
    if (s == "img" || s == "image") return PckNorm::image;
    throw ValidationError("PCK normalization must be 'bbox' or 'img', got '" + s + "'");
}

PckAggregation parse_pck_aggregation(const std::string& s) {
    if (s == "point") return PckAggregation::per_point;
    if (s == "image") return PckAggregation::per_image;
    throw ValidationError("PCK aggregation must be 'point' or 'image', got '" + s + "'");
}

MatchResolution parse_resolution(const std::string& s) {
    if (s == "grid") return MatchResolution::grid;
    if (s == "pixel") return MatchResolution::pixel;
    throw ValidationError("match resolution must be 'grid' or 'pixel', got '" + s + "'");
}

PoseNorm parse_pose_norm(const std::string& s) {
    if (s == "bbox") return PoseNorm::person_bbox;
    if (s == "frame") return PoseNorm::frame;
    throw ValidationError("pose normalization must be 'bbox' or 'frame', got '" + s + "'");
}

const char* to_string(MatchResolution r) { return r == MatchResolution::grid ? "grid" : "pixel"; }
const char* to_string(PoseNorm n) { return n == PoseNorm::person_bbox ? "bbox" : "frame"; }

AppConfig parse_config(std::string_view toml_text, AppConfig cfg) {
    const toml::table root = parse_toml(toml_text);
    reject_unknown(root, "",
                   {"backend", "extraction", "semantic", "geometric", "temporal", "edit", "service", "preset"});

    if (const auto* t = section(root, "backend")) {
        reject_unknown(*t, "backend", {"kind", "cache_dir", "cache_entries", "threads"});
        read(*t, "kind", cfg.backend);
        std::string dir;
        read(*t, "cache_dir", dir);
        if (!dir.empty()) cfg.cache_dir = dir;
        read(*t, "cache_entries", cfg.cache_entries);
        read(*t, "threads", cfg.threads);
    }
    if (const auto* t = section(root, "extraction")) {
        reject_unknown(*t, "extraction", {"t", "block_index", "prompt", "ensemble_size", "seed"});
        read(*t, "t", cfg.extraction.t);
        read(*t, "block_index", cfg.extraction.block_index);
        read(*t, "prompt", cfg.extraction.prompt);
        read(*t, "ensemble_size", cfg.extraction.ensemble_size);
        read(*t, "seed", cfg.extraction.rng_seed);
    }
    if (const auto* t = section(root, "semantic")) {
        reject_unknown(*t, "semantic", {"alpha", "norm", "aggregation", "resolution"});
        read(*t, "alpha", cfg.semantic.alpha);
        std::string s;
        if (read(*t, "norm", s), !s.empty()) cfg.semantic.norm = parse_pck_norm(s);
        s.clear();
        if (read(*t, "aggregation", s), !s.empty()) cfg.semantic.aggregation = parse_pck_aggregation(s);
        s.clear();
        if (read(*t, "resolution", s), !s.empty()) cfg.semantic.resolution = parse_resolution(s);
    }
    if (const auto* t = section(root, "geometric")) {
        reject_unknown(*t, "geometric", {"epsilons", "max_keypoints", "ransac_threshold", "ransac_iters", "seed"});
        cfg.geometric.epsilons = read_doubles(*t, "epsilons", cfg.geometric.epsilons);
        read(*t, "max_keypoints", cfg.geometric.max_keypoints);
        read(*t, "ransac_threshold", cfg.geometric.ransac_threshold_px);
        read(*t, "ransac_iters", cfg.geometric.ransac_iters);
        read(*t, "seed", cfg.geometric.seed);
    }
    if (const auto* t = section(root, "temporal")) {
        reject_unknown(*t, "temporal",
                       {"temperature", "radius", "top_k", "context_frames", "contour_tolerance", "pose_alphas",
                        "pose_norm"});
        read(*t, "temperature", cfg.propagation.temperature);
        read(*t, "radius", cfg.propagation.radius);
        read(*t, "top_k", cfg.propagation.top_k);
        read(*t, "context_frames", cfg.propagation.context_frames);
        if (t->contains("contour_tolerance")) {
            double tol = 0.0;
            read(*t, "contour_tolerance", tol);
            cfg.contour_tolerance = tol;
        }
        cfg.pose_alphas = read_doubles(*t, "pose_alphas", cfg.pose_alphas);
        std::string s;
        if (read(*t, "pose_norm", s), !s.empty()) cfg.pose_norm = parse_pose_norm(s);
    }
    if (const auto* t = section(root, "edit")) {
        reject_unknown(*t, "edit", {"n_points", "drop_quantile", "resolution", "ransac_threshold", "ransac_iters", "seed"});
        read(*t, "n_points", cfg.edit.n_points);
        read(*t, "drop_quantile", cfg.edit.drop_quantile);
        std::string s;
        if (read(*t, "resolution", s), !s.empty()) cfg.edit.resolution = parse_resolution(s);
        read(*t, "ransac_threshold", cfg.edit.ransac.threshold_px);
        read(*t, "ransac_iters", cfg.edit.ransac.max_iters);
        read(*t, "seed", cfg.edit.ransac.seed);
    }
    if (const auto* t = section(root, "service")) {
        reject_unknown(*t, "service", {"host", "port", "max_image_side", "max_inflight_extractions"});
        read(*t, "host", cfg.service.host);
        read(*t, "port", cfg.service.port);
        read(*t, "max_image_side", cfg.service.max_image_side);
        read(*t, "max_inflight_extractions", cfg.service.max_inflight_extractions);
    }
    for (auto& p : presets_from(root)) {
        bool replaced = false;
        for (auto& existing : cfg.presets) {
            if (existing.name == p.name) {
                existing = p;
                replaced = true;
            }
        }
        if (!replaced) cfg.presets.push_back(std::move(p));
    }
    cfg.extraction.validate();
    cfg.propagation.validate();
    return cfg;
}

AppConfig load_config(const std::filesystem::path& path, AppConfig base) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

void apply_preset(AppConfig& cfg, const Preset& preset) {
    const std::uint64_t seed = cfg.extraction.rng_seed;
    cfg.extraction = preset.extraction;
    cfg.extraction.rng_seed = seed;
    if (preset.propagation) cfg.propagation = *preset.propagation;
}

}  // namespace dift
