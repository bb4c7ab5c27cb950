#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dift/diffusion/schedule.hpp"
#include "dift/edit/edit_prop.hpp"
#include "dift/geometric/hpatches.hpp"
#include "dift/semantic/evaluate.hpp"
#include "dift/temporal/video_eval.hpp"

namespace dift {

/// A named, published extraction setting.
struct Preset {
    std::string name;
    std::string model;  // "sd" or "adm"
    std::string task;   // "semantic", "geometric", "temporal"
    ExtractionConfig extraction;
    std::optional<PropagationConfig> propagation;
};

/// Every published setting, in a fixed order.
const std::vector<Preset>& builtin_presets();

/// Parses [preset.<name>] tables from TOML text.
std::vector<Preset> parse_presets(std::string_view toml_text);

const Preset& find_preset(std::span<const Preset> presets, const std::string& name);

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    int max_image_side = 4096;
    int max_inflight_extractions = 4;
};

/// Everything a CLI run or the service needs; TOML sections mirror the fields.
struct AppConfig {
    std::string backend = "toy";  // "toy" or the base URL of a denoiser sidecar
    std::optional<std::string> cache_dir;
    std::size_t cache_entries = 1024;
    unsigned threads = 0;

    ExtractionConfig extraction;
    SemanticEvalOptions semantic;
    HPatchesOptions geometric;
    PropagationConfig propagation;
    std::optional<double> contour_tolerance;
    std::vector<double> pose_alphas = {0.1, 0.2};
    PoseNorm pose_norm = PoseNorm::person_bbox;
    EditConfig edit;
    ServiceConfig service;

    std::vector<Preset> presets = builtin_presets();  // built-ins plus file-defined ones
};

/// Overlays a TOML document onto `base`. Unknown keys are rejected.
AppConfig parse_config(std::string_view toml_text, AppConfig base = {});
AppConfig load_config(const std::filesystem::path& path, AppConfig base = {});

/// Copies the preset's extraction (and propagation, when present) settings.
void apply_preset(AppConfig& cfg, const Preset& preset);

PckNorm parse_pck_norm(const std::string& s);
PckAggregation parse_pck_aggregation(const std::string& s);
MatchResolution parse_resolution(const std::string& s);
PoseNorm parse_pose_norm(const std::string& s);
const char* to_string(MatchResolution r);
const char* to_string(PoseNorm n);

}  // namespace dift
