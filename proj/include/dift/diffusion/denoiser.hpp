#pragma once

#include <span>
#include <string>
#include <vector>

#include "dift/core/tensor.hpp"
#include "dift/core/types.hpp"
#include "dift/diffusion/schedule.hpp"

namespace dift {

/// Activation grid of one upsampling block, C x h x w.
using Activation = Tensor3<float>;

/// A denoising U-Net seen from the outside: it maps a noisy input at step t
/// (plus an optional text prompt) to the outputs of its upsampling blocks,
/// ordered from the first decoder stage to the last.
///
/// Implementations must be deterministic; all randomness lives in the noise
/// draw performed by the extractor.
class DenoiserClient {
public:
    virtual ~DenoiserClient() = default;

    virtual std::string id() const = 0;
    virtual const NoiseSchedule& schedule() const = 0;
    virtual int num_blocks() const = 0;

    /// Image to the model's input space (identity-like for pixel-space models).
    virtual Tensor3<double> encode(const ImageRef& image) const = 0;

    virtual std::vector<Activation> forward(const Tensor3<double>& noisy, int t,
                                            const std::string& prompt) const = 0;

    virtual bool supports_batching() const { return false; }
    /// Default runs forward() once per input.
    virtual std::vector<std::vector<Activation>> forward_batch(std::span<const Tensor3<double>> noisy, int t,
                                                               const std::string& prompt) const;

    /// Whether concurrent calls from several threads are allowed.
    virtual bool thread_safe() const { return false; }
};

}  // namespace dift
