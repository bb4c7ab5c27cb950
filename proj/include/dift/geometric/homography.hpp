#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "dift/core/types.hpp"

namespace dift {

/// Invertible planar projective transform, stored row-major and scaled so
/// that h(2,2) = 1 whenever that entry is nonzero.
class Homography {
public:
    Homography();  // identity
    explicit Homography(const std::array<double, 9>& row_major);

    static Homography translation(double tx, double ty);

    double operator()(int row, int col) const { return m_[static_cast<std::size_t>(row) * 3 + col]; }
    const std::array<double, 9>& row_major() const { return m_; }
    double determinant() const;
    Homography inverse() const;

    /// (a * b)(p) = a(b(p)).
    friend Homography operator*(const Homography& a, const Homography& b);

private:
    std::array<double, 9> m_;
};

/// Homogeneous multiply then perspective divide. Throws EstimationError when
/// p maps to infinity.
Point2D apply_homography(const Homography& h, Point2D p);

struct Correspondence {
    Point2D source;
    Point2D target;
};

struct RansacOptions {
    double threshold_px = 3.0;
    int max_iters = 2000;
    std::uint64_t seed = 0;
};

struct HomographyEstimate {
    Homography homography;
    std::vector<bool> inliers;  // parallel to the input matches
    std::size_t inlier_count = 0;
    int degenerate_samples = 0;
};

/// Least-squares DLT on Hartley-normalized points (exact for 4 points in
/// general position). Throws EstimationError on a degenerate configuration.
Homography fit_homography_dlt(std::span<const Correspondence> matches);

/// RANSAC over 4-point DLT hypotheses; inlier iff forward transfer error is
/// at most threshold_px; the winner is refit on its inliers. The result does
/// not depend on the order of `matches`.
HomographyEstimate estimate_homography(std::span<const Correspondence> matches, const RansacOptions& options = {});

struct CornerAccuracy {
    double mean_error = 0.0;
    std::map<double, bool> correct;  // epsilon -> mean_error <= epsilon
};

/// Mean distance between the four image corners mapped by both transforms.
double mean_corner_error(const Homography& estimate, const Homography& truth, Dims reference);

CornerAccuracy corner_accuracy(const Homography& estimate, const Homography& truth, Dims reference,
                               std::span<const double> epsilons);

}  // namespace dift
