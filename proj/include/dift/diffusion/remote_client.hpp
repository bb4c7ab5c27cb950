#pragma once

#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "dift/diffusion/denoiser.hpp"

namespace httplib {
class Server;
}

namespace dift {

// HTTP protocol spoken to a model sidecar process (see tools/dift_sidecar.py).
//
//   GET  /config   -> {"id": str, "alpha_bar": [T floats], "num_blocks": int}
//   POST /encode   {"image": array(H,W,3 float32)}            -> {"latent": array(C,H,W float64)}
//   POST /forward  {"t": int, "prompt": str, "inputs": [array(C,H,W float64), ...]}
//                  -> {"outputs": [[array(C,h,w float32) per block] per input]}
//
// An array is {"shape": [...], "dtype": "float32"|"float64", "data": base64 little-endian}.
nlohmann::json tensor_to_wire(const Tensor3<double>& t);
nlohmann::json tensor_to_wire(const Tensor3<float>& t);
Tensor3<double> tensor_f64_from_wire(const nlohmann::json& j);
Tensor3<float> tensor_f32_from_wire(const nlohmann::json& j);
nlohmann::json image_to_wire(const ImageRef& image);
ImageRef image_from_wire(const nlohmann::json& j, std::string id);

/// DenoiserClient backed by a remote sidecar. The schedule and block layout
/// are fetched from the sidecar at construction. Throws BackendError when the
/// sidecar is unreachable or misbehaves.
class RemoteDenoiserClient final : public DenoiserClient {
public:
    explicit RemoteDenoiserClient(std::string base_url, int timeout_seconds = 600);
    ~RemoteDenoiserClient() override;

    std::string id() const override { return id_; }
    const NoiseSchedule& schedule() const override { return *schedule_; }
    int num_blocks() const override { return num_blocks_; }
    Tensor3<double> encode(const ImageRef& image) const override;
    std::vector<Activation> forward(const Tensor3<double>& noisy, int t, const std::string& prompt) const override;
    bool supports_batching() const override { return true; }
    std::vector<std::vector<Activation>> forward_batch(std::span<const Tensor3<double>> noisy, int t,
                                                       const std::string& prompt) const override;

private:
    nlohmann::json call(const std::string& method, const std::string& path, const nlohmann::json* body) const;

    std::string base_url_;
    int timeout_seconds_;
    std::string id_;
    std::optional<NoiseSchedule> schedule_;
    int num_blocks_ = 0;
};

/// Installs the sidecar protocol routes on `server`, backed by `client`.
/// Used to expose the toy denoiser over HTTP and by the protocol tests.
void register_denoiser_routes(httplib::Server& server, std::shared_ptr<const DenoiserClient> client);

}  // namespace dift
