#include "dift/diffusion/remote_client.hpp"

#include <httplib.h>

#include "dift/core/encoding.hpp"
#include "dift/core/errors.hpp"

namespace dift {
namespace {

using nlohmann::json;

std::vector<int> wire_shape(const json& j, std::size_t rank) {
    if (!j.is_object() || !j.contains("shape") || !j.contains("dtype") || !j.contains("data")) {
        throw DecodeError("malformed wire array");
    }
    auto shape = j.at("shape").get<std::vector<int>>();
    if (shape.size() != rank) throw DecodeError("wire array has rank " + std::to_string(shape.size()));
    return shape;
}

// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ValidationError("backend url needs a scheme: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, ""};
    std::string prefix = url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, slash), prefix};
}

}  // namespace

json tensor_to_wire(const Tensor3<double>& t) {
    return {{"shape", {t.channels(), t.height(), t.width()}}, {"dtype", "float64"},
            {"data", base64_encode(pack_f64(t.values()))}};
}

json tensor_to_wire(const Tensor3<float>& t) {
    return {{"shape", {t.channels(), t.height(), t.width()}}, {"dtype", "float32"},
            {"data", base64_encode(pack_f32(t.values()))}};
}

Tensor3<double> tensor_f64_from_wire(const json& j) {
    const auto shape = wire_shape(j, 3);
    const auto dtype = j.at("dtype").get<std::string>();
    const auto raw = base64_decode(j.at("data").get<std::string>());
    std::vector<double> values;
    if (dtype == "float64") {
        values = unpack_f64(raw);
    } else if (dtype == "float32") {
        const auto f = unpack_f32(raw);
        values.assign(f.begin(), f.end());
    } else {
        throw DecodeError("unsupported wire dtype " + dtype);
    }
    return Tensor3<double>(shape[0], shape[1], shape[2], std::move(values));
}

Tensor3<float> tensor_f32_from_wire(const json& j) {
    const auto shape = wire_shape(j, 3);
    const auto dtype = j.at("dtype").get<std::string>();
    const auto raw = base64_decode(j.at("data").get<std::string>());
    std::vector<float> values;
    if (dtype == "float32") {
        values = unpack_f32(raw);
    } else if (dtype == "float64") {
        const auto d = unpack_f64(raw);
        values.assign(d.begin(), d.end());
    } else {
        throw DecodeError("unsupported wire dtype " + dtype);
    }
    return Tensor3<float>(shape[0], shape[1], shape[2], std::move(values));
}

json image_to_wire(const ImageRef& image) {
    return {{"shape", {image.height(), image.width(), 3}}, {"dtype", "float32"},
            {"data", base64_encode(pack_f32(image.pixels()))}};
}

ImageRef image_from_wire(const json& j, std::string id) {
    const auto shape = wire_shape(j, 3);
    if (shape[2] != 3 || j.at("dtype").get<std::string>() != "float32") throw DecodeError("image must be H x W x 3 float32");
    return ImageRef(std::move(id), shape[0], shape[1], unpack_f32(base64_decode(j.at("data").get<std::string>())));
}

RemoteDenoiserClient::RemoteDenoiserClient(std::string base_url, int timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
    const json config = call("GET", "/config", nullptr);
    try {
        id_ = config.at("id").get<std::string>();
        schedule_.emplace(config.at("alpha_bar").get<std::vector<double>>());
        num_blocks_ = config.at("num_blocks").get<int>();
    } catch (const json::exception& e) {
        throw BackendError(std::string("sidecar /config response malformed: ") + e.what());
    } catch (const ValidationError& e) {
        throw BackendError(std::string("sidecar reported an invalid schedule: ") + e.what());
    }
    if (num_blocks_ < 1) throw BackendError("sidecar reports no upsampling blocks");
}

RemoteDenoiserClient::~RemoteDenoiserClient() = default;

json RemoteDenoiserClient::call(const std::string& method, const std::string& path, const json* body) const {
    const auto [host, prefix] = split_url(base_url_);
    httplib::Client cli(host);
    cli.set_connection_timeout(10);
    cli.set_read_timeout(timeout_seconds_);
    cli.set_write_timeout(timeout_seconds_);
    const std::string full = prefix + path;
    httplib::Result res = method == "GET" ? cli.Get(full) : cli.Post(full, body->dump(), "application/json");
    if (!res) {
        throw BackendError("sidecar " + base_url_ + full + " unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw BackendError("sidecar " + full + " returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    auto parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw BackendError("sidecar " + full + " returned invalid JSON");
    return parsed;
}

Tensor3<double> RemoteDenoiserClient::encode(const ImageRef& image) const {
    const json body = {{"image", image_to_wire(image)}};
    const json res = call("POST", "/encode", &body);
    try {
        return tensor_f64_from_wire(res.at("latent"));
    } catch (const std::exception& e) {
        throw BackendError(std::string("sidecar /encode response malformed: ") + e.what());
    }
}

std::vector<Activation> RemoteDenoiserClient::forward(const Tensor3<double>& noisy, int t,
                                                      const std::string& prompt) const {
    auto batch = forward_batch(std::span<const Tensor3<double>>(&noisy, 1), t, prompt);
    return std::move(batch.front());
}

std::vector<std::vector<Activation>> RemoteDenoiserClient::forward_batch(std::span<const Tensor3<double>> noisy, int t,
                                                                         const std::string& prompt) const {
    json inputs = json::array();
    for (const auto& x : noisy) inputs.push_back(tensor_to_wire(x));
    const json body = {{"t", t}, {"prompt", prompt}, {"inputs", std::move(inputs)}};
    const json res = call("POST", "/forward", &body);
    std::vector<std::vector<Activation>> out;
    try {
        for (const auto& per_input : res.at("outputs")) {
            std::vector<Activation> blocks;
            for (const auto& block : per_input) blocks.push_back(tensor_f32_from_wire(block));
            out.push_back(std::move(blocks));
        }
    } catch (const std::exception& e) {
        throw BackendError(std::string("sidecar /forward response malformed: ") + e.what());
    }
    if (out.size() != noisy.size()) throw BackendError("sidecar /forward returned the wrong batch size");
    return out;
}

void register_denoiser_routes(httplib::Server& server, std::shared_ptr<const DenoiserClient> client) {
    auto reply = [](httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    };
    server.Get("/config", [client, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, {{"id", client->id()}, {"alpha_bar", client->schedule().values()},
                         {"num_blocks", client->num_blocks()}});
    });
    server.Post("/encode", [client, reply](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto body = json::parse(req.body);
            reply(res, 200, {{"latent", tensor_to_wire(client->encode(image_from_wire(body.at("image"), "wire")))}});
        } catch (const std::exception& e) {
            reply(res, 400, {{"error", e.what()}});
        }
    });
    server.Post("/forward", [client, reply](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto body = json::parse(req.body);
            const int t = body.at("t").get<int>();
            const auto prompt = body.at("prompt").get<std::string>();
            json outputs = json::array();
            for (const auto& input : body.at("inputs")) {
                json blocks = json::array();
                for (const auto& a : client->forward(tensor_f64_from_wire(input), t, prompt)) {
                    blocks.push_back(tensor_to_wire(a));
                }
                outputs.push_back(std::move(blocks));
            }
            reply(res, 200, {{"outputs", std::move(outputs)}});
        } catch (const std::exception& e) {
            reply(res, 400, {{"error", e.what()}});
        }
    });
}

}  // namespace dift
