#pragma once

#include <span>
#include <vector>

#include "dift/core/types.hpp"
#include "dift/temporal/label_mask.hpp"

namespace dift {

struct PropagationConfig {
    double temperature = 0.1;  // softmax temperature over cosine similarities
    int radius = 15;           // Chebyshev radius, in feature-grid cells
    int top_k = 10;            // candidates kept per target cell, across the whole context
    int context_frames = 28;   // most recent predictions used besides frame 0

    void validate() const;
};

/// Frame k >= 1 attends to frame 0 (ground truth) plus up to context_frames
/// of its most recent predictions. Each target cell keeps the top_k most
/// similar context cells within `radius` of its own location, weights them by
/// softmax(similarity / temperature) and mixes their label distributions.
/// first_mask must have the grid dims of the features; the result holds one
/// mask per frame, starting with first_mask.
std::vector<LabelMask> propagate_labels(std::span<const FeatureMap> frames, const LabelMask& first_mask,
                                        const PropagationConfig& cfg, unsigned threads = 0);

/// Frame-0 context indices for frame k: {0, max(1, k - context), ..., k - 1}.
std::vector<int> context_indices(int frame, int context_frames);

struct KeypointTrack {
    std::vector<std::vector<Point2D>> frames;  // [frame][keypoint], frame 0 = input
};

/// Encodes keypoint i as label i + 1 (one-hot in the cell under it; keypoints
/// sharing a cell split it evenly), propagates, and reads each keypoint back
/// as the center of the cell where its channel peaks.
KeypointTrack track_keypoints(std::span<const FeatureMap> frames, std::span<const Point2D> first_keypoints,
                              const PropagationConfig& cfg, unsigned threads = 0);

}  // namespace dift
