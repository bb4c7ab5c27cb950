#pragma once

#include <vector>

#include "dift/diffusion/backend.hpp"
#include "dift/geometric/homography.hpp"
#include "dift/matching/matching.hpp"
#include "dift/temporal/label_mask.hpp"

namespace dift {

/// RGBA raster (H x W x 4, row-major interleaved), values in [0, 1].
struct RgbaImage {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    Dims dims() const { return {height, width}; }
    float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 4 + c]; }
    float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 4 + c]; }

    void validate() const;
};

/// Straight-alpha edit plus the binary region (nonzero = inside) it lives in.
struct EditLayer {
    RgbaImage rgba;
    HardMask region;

    /// Throws ValidationError unless dims match `source` and alpha is zero
    /// outside the region.
    void validate(Dims source) const;
};

/// Deterministic stratified sample of up to n distinct region pixels: the
/// region's bounding box is cut into a g x g grid (g = ceil(sqrt(n)), refined
/// while strata come up short) and each stratum contributes its region pixel
/// nearest the stratum center. Throws ValidationError below 4 points.
std::vector<Point2D> sample_region_points(const HardMask& region, int n);

/// Inverse-warps a straight-alpha layer into target dims through the
/// source->target homography. Bilinear on premultiplied color; taps outside
/// the layer are transparent. The result is premultiplied.
RgbaImage warp_premultiplied(const RgbaImage& layer, const Homography& source_to_target, Dims target);

/// Premultiplied "over": out = layer.rgb + (1 - layer.a) * target. Pixels
/// with layer alpha 0 are copied from the target unchanged.
ImageRef composite_over(const ImageRef& target, const RgbaImage& premultiplied);

struct EditConfig {
    int n_points = 64;
    double drop_quantile = 0.25;  // matches below this similarity quantile are dropped
    MatchResolution resolution = MatchResolution::grid;
    RansacOptions ransac;
};

struct EditDiagnostics {
    std::vector<MatchResult> matches;  // one per sampled point, in sample order
    std::vector<bool> kept;            // survived the quantile filter
    std::vector<bool> inliers;         // RANSAC inliers among kept matches
    double similarity_floor = 0.0;
};

struct EditResult {
    ImageRef composite;
    Homography homography;
    EditDiagnostics diagnostics;
};

/// Raised when no homography could be fit; carries the match set.
class EditPropagationError : public EstimationError {
public:
    EditPropagationError(const std::string& what, EditDiagnostics diagnostics)
        : EstimationError(what), diagnostics_(std::move(diagnostics)) {}
    const EditDiagnostics& diagnostics() const { return diagnostics_; }

private:
    EditDiagnostics diagnostics_;
};

EditResult propagate_edit(const ImageRef& source, const EditLayer& edit, const ImageRef& target,
                          const FeatureBackend& backend, const ExtractionConfig& cfg, const EditConfig& options = {});

}  // namespace dift
