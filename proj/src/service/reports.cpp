#include "dift/service/reports.hpp"

#include <cstdio>
#include <sstream>

namespace dift {

using nlohmann::json;

namespace {

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string number_key(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

json extraction_json(const ExtractionConfig& cfg) {
    return {{"t", cfg.t},
            {"block_index", cfg.block_index},
            {"prompt", cfg.prompt},
            {"ensemble_size", cfg.ensemble_size},
            {"seed", cfg.rng_seed}};
}

json propagation_json(const PropagationConfig& cfg) {
    return {{"temperature", cfg.temperature},
            {"radius", cfg.radius},
            {"top_k", cfg.top_k},
            {"context_frames", cfg.context_frames}};
}

json preset_json(const Preset& preset) {
    json j = {{"name", preset.name},
              {"model", preset.model},
              {"task", preset.task},
              {"extraction", extraction_json(preset.extraction)}};
    j["extraction"].erase("seed");
    if (preset.propagation) j["propagation"] = propagation_json(*preset.propagation);
    return j;
}

json pck_report_json(const PckReport& r) {
    return {{"alpha", r.alpha},
            {"norm", to_string(r.norm)},
            {"aggregation", to_string(r.aggregation)},
            {"per_category", r.per_category},
            {"mean_over_categories", r.mean_over_categories},
            {"overall", r.overall},
            {"pairs_evaluated", r.pairs_evaluated},
            {"keypoints_evaluated", r.keypoints_evaluated},
            {"pairs_skipped", r.pairs_skipped},
            {"skipped_pairs", r.skipped_pairs}};
}

std::string pck_table(const PckReport& r) {
    std::ostringstream os;
    os << "PCK@alpha_" << to_string(r.norm) << "=" << number_key(r.alpha) << " (per-" << to_string(r.aggregation)
       << ")\n";
    std::size_t width = 8;
    for (const auto& [c, v] : r.per_category) width = std::max(width, c.size() + 2);
    for (const auto& [c, v] : r.per_category) os << pad(c, width) << pct(v) << '\n';
    os << pad("Mean", width) << pct(r.mean_over_categories) << '\n';
    os << pad("All", width) << pct(r.overall) << '\n';
    os << "pairs " << r.pairs_evaluated << ", keypoints " << r.keypoints_evaluated << ", skipped " << r.pairs_skipped
       << '\n';
    return os.str();
}

json grid_search_json(const GridSearchResult& g) {
    json cells = json::array();
    for (const auto& c : g.cells) {
        json j = {{"t", c.t}, {"block_index", c.block_index}};
        if (c.score) {
            j["score"] = *c.score;
        } else {
            j["score"] = nullptr;
            j["error"] = c.error;
        }
        cells.push_back(j);
    }
    return {{"best", {{"t", g.best_t}, {"block_index", g.best_block}, {"score", g.best_score}}}, {"cells", cells}};
}

std::string grid_search_table(const GridSearchResult& g) {
    std::ostringstream os;
    os << pad("t", 8) << pad("block", 8) << "PCK\n";
    for (const auto& c : g.cells) {
        os << pad(std::to_string(c.t), 8) << pad(std::to_string(c.block_index), 8)
           << (c.score ? pct(*c.score) : "failed: " + c.error) << '\n';
    }
    os << "best: t=" << g.best_t << " block=" << g.best_block << " PCK=" << pct(g.best_score) << '\n';
    return os.str();
}

json cub_report_json(const CubReport& r) {
    json splits = json::array();
    for (const auto& [s, v] : r.split_pck) splits.push_back({{"split", s}, {"pck", v}});
    return {{"alpha", r.alpha}, {"norm", "img"}, {"splits", splits}, {"mean", r.mean}, {"pairs_skipped", r.pairs_skipped}};
}

std::string cub_table(const CubReport& r) {
    std::ostringstream os;
    os << "CUB PCK@alpha_img=" << number_key(r.alpha) << '\n';
    for (const auto& [s, v] : r.split_pck) os << pad("split " + std::to_string(s), 10) << pct(v) << '\n';
    os << pad("Mean", 10) << pct(r.mean) << '\n';
    return os.str();
}

namespace {

json accuracy_json(const HPatchesAccuracy& a) {
    json acc = json::object();
    json correct = json::object();
    for (const auto& [eps, v] : a.accuracy) acc[number_key(eps)] = v;
    for (const auto& [eps, v] : a.correct) correct[number_key(eps)] = v;
    return {{"pairs", a.pairs}, {"accuracy", acc}, {"correct", correct}};
}

}  // namespace

json hpatches_report_json(const HPatchesReport& r) {
    json pairs = json::array();
    for (const auto& p : r.pairs) {
        json j = {{"pair", p.pair_id},
                  {"change", to_string(p.change)},
                  {"estimated", p.estimated},
                  {"matches", p.matches},
                  {"inliers", p.inliers}};
        if (p.estimated) {
            j["mean_corner_error"] = p.mean_corner_error;
        } else {
            j["error"] = p.error;
        }
        pairs.push_back(j);
    }
    return {{"epsilons", r.epsilons},
            {"overall", accuracy_json(r.overall)},
            {"illumination", accuracy_json(r.illumination)},
            {"viewpoint", accuracy_json(r.viewpoint)},
            {"estimation_failures", r.estimation_failures},
            {"skipped_pairs", r.skipped_pairs},
            {"pairs", pairs}};
}

std::string hpatches_table(const HPatchesReport& r) {
    std::ostringstream os;
    os << "Homography accuracy [%]\n" << pad("", 14);
    for (double e : r.epsilons) os << pad("e=" + number_key(e), 8);
    os << '\n';
    const std::pair<const char*, const HPatchesAccuracy*> rows[] = {
        {"all", &r.overall}, {"illumination", &r.illumination}, {"viewpoint", &r.viewpoint}};
    for (const auto& [name, acc] : rows) {
        os << pad(name, 14);
        for (double e : r.epsilons) os << pad(pct(acc->accuracy.at(e)), 8);
        os << '\n';
    }
    os << "pairs " << r.overall.pairs << ", estimation failures " << r.estimation_failures << '\n';
    return os.str();
}

json davis_report_json(const DavisReport& r) {
    json objects = json::array();
    for (const auto& o : r.objects) {
        objects.push_back({{"video", o.video}, {"object", o.object_id}, {"J", o.J}, {"F", o.F}, {"frames", o.frames}});
    }
    return {{"J&F_mean", r.JF_mean}, {"J_mean", r.J_mean}, {"F_mean", r.F_mean}, {"videos", r.videos},
            {"objects", objects}};
}

std::string davis_table(const DavisReport& r) {
    std::ostringstream os;
    os << pad("J&F_m", 8) << pad("J_m", 8) << "F_m\n";
    os << pad(pct(r.JF_mean), 8) << pad(pct(r.J_mean), 8) << pct(r.F_mean) << '\n';
    os << "videos " << r.videos << ", objects " << r.objects.size() << '\n';
    return os.str();
}

json jhmdb_report_json(const JhmdbReport& r) {
    json pck = json::object();
    json correct = json::object();
    for (const auto& [a, v] : r.pck) pck[number_key(a)] = v;
    for (const auto& [a, v] : r.correct) correct[number_key(a)] = v;
    return {{"pck", pck}, {"correct", correct}, {"keypoints", r.keypoints}, {"videos", r.videos}};
}

std::string jhmdb_table(const JhmdbReport& r) {
    std::ostringstream os;
    for (const auto& [a, v] : r.pck) os << pad("PCK@" + number_key(a), 10);
    os << '\n';
    for (const auto& [a, v] : r.pck) os << pad(pct(v), 10);
    os << "\nvideos " << r.videos << ", keypoints " << r.keypoints << '\n';
    return os.str();
}

}  // namespace dift
