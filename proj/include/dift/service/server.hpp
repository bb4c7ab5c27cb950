#pragma once

#include <memory>
#include <ostream>

#include <json.hpp>

#include "dift/service/session.hpp"

namespace httplib {
class Server;
}

namespace dift {

// HTTP API (JSON unless noted; errors are {"error": {"status", "message"}}):
//   GET  /healthz          -> {"status": "ok", "backend": id}
//   GET  /presets          -> {"presets": [...]}
//   POST /images           multipart field "file" -> {"id", "height", "width"}
//                          415 undecodable, 413 larger than max_image_side
//   POST /match            {"source_id", "target_id", "point": [x, y], "config": {...}}
//                          -> {"source_point", "target_point", "similarity", "heatmap"}
//   POST /edit-propagate   {"source_id", "target_ids", "edit_png", "mask_png", "config": {...}}
//                          -> {"results": [...]} with per-target failures inline
// "config" accepts preset, t, block_index, prompt, ensemble_size, seed,
// resolution and, for edits, n_points, drop_quantile, ransac_threshold,
// ransac_iters, ransac_seed.
void register_routes(httplib::Server& server, std::shared_ptr<Session> session);

/// Base64 float16 heatmap normalized to [0, 1] (all zeros when constant),
/// with dims and the raw range.
nlohmann::json heatmap_json(std::span<const double> values, int height, int width);

/// Blocks serving the API on cfg.service.host:port until the server stops.
int serve(std::shared_ptr<Session> session, std::ostream& log);

}  // namespace dift
