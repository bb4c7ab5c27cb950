#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dift/core/types.hpp"
#include "dift/geometric/homography.hpp"
#include "dift/temporal/label_mask.hpp"

namespace dift::testing {

/// Smooth multi-frequency color texture; every 2x2 block differs from its
/// neighbours, so toy features are locally distinctive.
ImageRef textured_image(int height, int width, std::uint64_t seed, std::string id = "texture");

/// Every pixel a different color (a bijective color ramp).
ImageRef distinct_cell_image(int height, int width, int cell, std::string id = "cells");

/// Target image whose pixel q samples the source at H^-1(q) bilinearly;
/// taps outside the source clamp to the border.
ImageRef warp_image(const ImageRef& source, const Homography& source_to_target, Dims target,
                    std::string id = "warped");

/// Circular shift by (dy, dx) pixels.
ImageRef roll_image(const ImageRef& image, int dy, int dx, std::string id = "rolled");

/// Mild random projective transform about the center of an image: rotation,
/// scale, shear and perspective bounded so the image stays mostly in view.
Homography random_homography(std::mt19937_64& rng, Dims image, double strength = 1.0);

/// C x h x w feature map with i.i.d. normal entries.
FeatureMap random_features(int channels, int height, int width, std::mt19937_64& rng, Dims source = {});

/// Feature map whose cells are unit-norm and pairwise well separated.
FeatureMap orthogonal_cell_features(int height, int width, Dims source = {});

}  // namespace dift::testing
