#include "dift/service/server.hpp"

#include <algorithm>
#include <mutex>

#include <httplib.h>

#include "dift/core/encoding.hpp"
#include "dift/core/errors.hpp"
#include "dift/edit/edit_prop.hpp"
#include "dift/matching/matching.hpp"
#include "dift/service/image_io.hpp"
#include "dift/service/reports.hpp"

namespace dift {
namespace {

using nlohmann::json;

class MalformedRequest : public ValidationError {
public:
    using ValidationError::ValidationError;
};

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, {{"error", {{"status", status}, {"message", message}}}});
}

int status_for(const std::exception& e) {
    if (dynamic_cast<const NotFoundError*>(&e)) return 404;
    if (dynamic_cast<const PayloadTooLargeError*>(&e)) return 413;
    if (dynamic_cast<const DecodeError*>(&e)) return 415;
    if (dynamic_cast<const MalformedRequest*>(&e)) return 400;
    if (dynamic_cast<const ValidationError*>(&e)) return 422;
    if (dynamic_cast<const EstimationError*>(&e)) return 422;
    if (dynamic_cast<const BackendError*>(&e)) return 503;
    if (dynamic_cast<const json::exception*>(&e)) return 422;
    return 500;
}

// Runs a handler and converts exceptions into JSON errors.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const std::exception& e) {
            send_error(res, status_for(e), e.what());
        }
    };
}

json parse_body(const httplib::Request& req) {
    try {
        json j = json::parse(req.body);
        if (!j.is_object()) throw MalformedRequest("request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw MalformedRequest(std::string("malformed JSON body: ") + e.what());
    }
}

Point2D parse_point(const json& j) {
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        return {j[0].get<double>(), j[1].get<double>()};
    }
    if (j.is_object() && j.contains("x") && j.contains("y") && j["x"].is_number() && j["y"].is_number()) {
        return {j["x"].get<double>(), j["y"].get<double>()};
    }
    throw ValidationError("point must be [x, y] or {\"x\": .., \"y\": ..}");
}

json point_json(Point2D p) { return json::array({p.x, p.y}); }

std::string required_string(const json& body, const char* key) {
    if (!body.contains(key) || !body[key].is_string()) {
        throw ValidationError(std::string("field '") + key + "' must be a string");
    }
    return body[key].get<std::string>();
}

ExtractionConfig request_extraction(const Session& session, const json& config) {
    ExtractionConfig cfg = session.config().extraction;
    if (config.contains("preset")) {
        const auto& preset = find_preset(session.config().presets, config.at("preset").get<std::string>());
        const auto seed = cfg.rng_seed;
        cfg = preset.extraction;
        cfg.rng_seed = seed;
    }
    if (config.contains("t")) cfg.t = config.at("t").get<int>();
    if (config.contains("block_index")) cfg.block_index = config.at("block_index").get<int>();
    if (config.contains("prompt")) cfg.prompt = config.at("prompt").get<std::string>();
    if (config.contains("ensemble_size")) cfg.ensemble_size = config.at("ensemble_size").get<int>();
    if (config.contains("seed")) cfg.rng_seed = config.at("seed").get<std::uint64_t>();
    session.backend().validate(cfg);
    return cfg;
}

json config_of(const json& body) {
    if (!body.contains("config")) return json::object();
    if (!body["config"].is_object()) throw ValidationError("field 'config' must be an object");
    return body["config"];
}

void handle_upload(Session& session, const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data()) throw MalformedRequest("expected a multipart/form-data upload");
    const httplib::MultipartFormData* file = nullptr;
    if (const auto it = req.files.find("file"); it != req.files.end()) {
        file = &it->second;
    } else if (!req.files.empty()) {
        file = &req.files.begin()->second;
    }
    if (file == nullptr) throw MalformedRequest("upload has no file part");
    const ImageRef img = decode_image(file->content, "upload", session.config().service.max_image_side);
    const std::string id = session.add_image(img);
    send_json(res, 200, {{"id", id}, {"height", img.height()}, {"width", img.width()}});
}

void handle_match(Session& session, const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const auto source = session.image(required_string(body, "source_id"));
    const auto target = session.image(required_string(body, "target_id"));
    if (!body.contains("point")) throw ValidationError("field 'point' is required");
    const Point2D p = parse_point(body["point"]);
    require_point_in(p, source->dims(), "query point");
    const json config = config_of(body);
    const ExtractionConfig cfg = request_extraction(session, config);
    MatchResolution resolution = session.config().semantic.resolution;
    if (config.contains("resolution")) resolution = parse_resolution(config.at("resolution").get<std::string>());

    const FeatureMap fs = session.extract(*source, cfg);
    const FeatureMap ft = session.extract(*target, cfg);
    const BestMatch m = best_match(fs, p, ft, resolution);
    json out;
    out["source_point"] = point_json(m.match.source_point);
    out["target_point"] = point_json(m.match.target_point);
    out["similarity"] = m.match.similarity;
    out["resolution"] = to_string(resolution);
    out["heatmap"] = heatmap_json(m.map.values, m.map.height, m.map.width);
    out["heatmap"]["argmax"] = json::array({m.map.argmax_row, m.map.argmax_col});
    out["config"] = extraction_json(cfg);
    send_json(res, 200, out);
}

json diagnostics_json(const EditDiagnostics& d) {
    json matches = json::array();
    for (std::size_t i = 0; i < d.matches.size(); ++i) {
        matches.push_back({{"source", point_json(d.matches[i].source_point)},
                           {"target", point_json(d.matches[i].target_point)},
                           {"similarity", d.matches[i].similarity},
                           {"kept", static_cast<bool>(d.kept[i])},
                           {"inlier", i < d.inliers.size() && d.inliers[i]}});
    }
    return {{"matches", matches}, {"similarity_floor", d.similarity_floor}};
}

void handle_edit(Session& session, const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const auto source = session.image(required_string(body, "source_id"));
    if (!body.contains("target_ids") || !body["target_ids"].is_array()) {
        throw ValidationError("field 'target_ids' must be an array of ids");
    }
    const int max_side = session.config().service.max_image_side;
    EditLayer edit;
    edit.rgba = decode_rgba(base64_decode(required_string(body, "edit_png")), max_side);
    edit.region = decode_binary_mask(base64_decode(required_string(body, "mask_png")), max_side);
    edit.validate(source->dims());

    const json config = config_of(body);
    const ExtractionConfig cfg = request_extraction(session, config);
    EditConfig ec = session.config().edit;
    if (config.contains("n_points")) ec.n_points = config.at("n_points").get<int>();
    if (config.contains("drop_quantile")) ec.drop_quantile = config.at("drop_quantile").get<double>();
    if (config.contains("resolution")) ec.resolution = parse_resolution(config.at("resolution").get<std::string>());
    if (config.contains("ransac_threshold")) ec.ransac.threshold_px = config.at("ransac_threshold").get<double>();
    if (config.contains("ransac_iters")) ec.ransac.max_iters = config.at("ransac_iters").get<int>();
    if (config.contains("ransac_seed")) ec.ransac.seed = config.at("ransac_seed").get<std::uint64_t>();

    json results = json::array();
    for (const auto& tid : body["target_ids"]) {
        json entry;
        entry["target_id"] = tid.is_string() ? tid : json(tid.dump());
        try {
            if (!tid.is_string()) throw ValidationError("target id must be a string");
            const auto target = session.image(tid.get<std::string>());
            std::optional<EditResult> r;
            session.with_model([&] { r = propagate_edit(*source, edit, *target, session.backend(), cfg, ec); });
            entry["ok"] = true;
            entry["composite_png"] = base64_encode(encode_png(r->composite));
            entry["homography"] = r->homography.row_major();
            entry["diagnostics"] = diagnostics_json(r->diagnostics);
        } catch (const EditPropagationError& e) {
            entry["ok"] = false;
            entry["status"] = 422;
            entry["error"] = e.what();
            entry["diagnostics"] = diagnostics_json(e.diagnostics());
        } catch (const std::exception& e) {
            entry["ok"] = false;
            entry["status"] = status_for(e);
            entry["error"] = e.what();
        }
        results.push_back(std::move(entry));
    }
    send_json(res, 200, {{"results", results}});
}

}  // namespace

json heatmap_json(std::span<const double> values, int height, int width) {
    if (values.size() != static_cast<std::size_t>(height) * width) throw ValidationError("heatmap dims mismatch");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = values.empty() ? 0.0 : *lo_it;
    const double hi = values.empty() ? 0.0 : *hi_it;
    std::vector<double> norm(values.size(), 0.0);
    if (hi > lo) {
        for (std::size_t i = 0; i < values.size(); ++i) norm[i] = (values[i] - lo) / (hi - lo);
    }
    return {{"height", height},       {"width", width}, {"dtype", "float16"}, {"encoding", "base64"},
            {"data", base64_encode(pack_f16(norm))}, {"min", lo},       {"max", hi}};
}

void register_routes(httplib::Server& server, std::shared_ptr<Session> session) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    server.Get("/healthz", guarded([session](const httplib::Request&, httplib::Response& res) {
                   send_json(res, 200, {{"status", "ok"}, {"backend", session->backend().id()}});
               }));
    server.Get("/presets", guarded([session](const httplib::Request&, httplib::Response& res) {
                   json list = json::array();
                   for (const auto& p : session->config().presets) list.push_back(preset_json(p));
                   send_json(res, 200, {{"presets", list}});
               }));
    server.Post("/images", guarded([session](const httplib::Request& req, httplib::Response& res) {
                    handle_upload(*session, req, res);
                }));
    server.Post("/match", guarded([session](const httplib::Request& req, httplib::Response& res) {
                    handle_match(*session, req, res);
                }));
    server.Post("/edit-propagate", guarded([session](const httplib::Request& req, httplib::Response& res) {
                    handle_edit(*session, req, res);
                }));
}

int serve(std::shared_ptr<Session> session, std::ostream& log) {
    httplib::Server server;
    register_routes(server, session);
    std::mutex log_mutex;
    server.set_logger([&](const httplib::Request& req, const httplib::Response& res) {
        std::lock_guard lock(log_mutex);
        log << req.method << ' ' << req.path << ' ' << res.status << '\n' << std::flush;
    });
    const auto& sc = session->config().service;
    log << "serving backend " << session->backend().id() << " on http://" << sc.host << ':' << sc.port << '\n'
        << std::flush;
    if (!server.listen(sc.host, sc.port)) throw ValidationError("cannot listen on " + sc.host + ":" + std::to_string(sc.port));
    return 0;
}

}  // namespace dift
