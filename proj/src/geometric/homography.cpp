#include "dift/geometric/homography.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <tuple>

#include <Eigen/Dense>

#include "dift/core/errors.hpp"
#include "dift/core/random.hpp"

namespace dift {
namespace {

constexpr int kRefitRounds = 10;

constexpr double kMinDeterminant = 1e-12;
constexpr double kInfinityDenominator = 1e-12;
// |sin| of the angle spanned by three points below which they count as collinear.
constexpr double kCollinearSine = 1e-6;

using Mat3 = Eigen::Matrix3d;

Mat3 to_eigen(const std::array<double, 9>& m) {
    Mat3 out;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out(r, c) = m[static_cast<std::size_t>(r) * 3 + c];
    }
    return out;
}

std::array<double, 9> from_eigen(const Mat3& m) {
    std::array<double, 9> out{};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(r) * 3 + c] = m(r, c);
    }
    return out;
}

// Similarity moving the centroid to the origin with mean distance sqrt(2).
Mat3 hartley_transform(std::span<const Point2D> pts) {
    double cx = 0.0;
    double cy = 0.0;
    for (const auto& p : pts) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
    mean_dist /= static_cast<double>(pts.size());
    if (!(mean_dist > 0.0)) throw EstimationError("degenerate point set: all points coincide");
    const double s = std::sqrt(2.0) / mean_dist;
    Mat3 t;
    t << s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0;
    return t;
}

bool collinear(Point2D a, Point2D b, Point2D c) {
    const double abx = b.x - a.x;
    const double aby = b.y - a.y;
    const double acx = c.x - a.x;
    const double acy = c.y - a.y;
    const double scale = std::hypot(abx, aby) * std::hypot(acx, acy);
    return std::abs(abx * acy - aby * acx) <= kCollinearSine * scale;
}

bool has_collinear_triple(const std::array<Point2D, 4>& p) {
    return collinear(p[0], p[1], p[2]) || collinear(p[0], p[1], p[3]) || collinear(p[0], p[2], p[3]) ||
           collinear(p[1], p[2], p[3]);
}

bool degenerate_sample(std::span<const Correspondence> sample) {
    std::array<Point2D, 4> s{};
    std::array<Point2D, 4> t{};
    for (std::size_t i = 0; i < 4; ++i) {
        s[i] = sample[i].source;
        t[i] = sample[i].target;
    }
    return has_collinear_triple(s) || has_collinear_triple(t);
}

// Squared forward transfer error; +inf when the point maps to infinity.
double transfer_error_sq(const Homography& h, const Correspondence& m) {
    const double w = h(2, 0) * m.source.x + h(2, 1) * m.source.y + h(2, 2);
    if (std::abs(w) < kInfinityDenominator) return std::numeric_limits<double>::infinity();
    const double x = (h(0, 0) * m.source.x + h(0, 1) * m.source.y + h(0, 2)) / w;
    const double y = (h(1, 0) * m.source.x + h(1, 1) * m.source.y + h(1, 2)) / w;
    const double dx = x - m.target.x;
    const double dy = y - m.target.y;
    return dx * dx + dy * dy;
}

struct Score {
    std::size_t count = 0;
    double sse = 0.0;

    bool better_than(const Score& o) const { return count > o.count || (count == o.count && sse < o.sse); }
};

Score score_model(const Homography& h, std::span<const Correspondence> matches, double threshold,
                  std::vector<bool>* mask) {
    const double t2 = threshold * threshold;
    Score s;
    if (mask) mask->assign(matches.size(), false);
    for (std::size_t i = 0; i < matches.size(); ++i) {
        const double e = transfer_error_sq(h, matches[i]);
        if (e <= t2) {
            ++s.count;
            s.sse += e;
            if (mask) (*mask)[i] = true;
        }
    }
    return s;
}

}  // namespace

Homography::Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

Homography::Homography(const std::array<double, 9>& row_major) : m_(row_major) {
    double fro = 0.0;
    for (double v : m_) {
        if (!std::isfinite(v)) throw ValidationError("homography entries must be finite");
        fro += v * v;
    }
    fro = std::sqrt(fro);
    if (fro == 0.0) throw ValidationError("homography is the zero matrix");
    const double scale = std::abs(m_[8]) > kMinDeterminant * fro ? m_[8] : fro;
    for (double& v : m_) v /= scale;
    if (!(std::abs(determinant()) > kMinDeterminant)) throw ValidationError("homography is singular");
}

Homography Homography::translation(double tx, double ty) { return Homography({1, 0, tx, 0, 1, ty, 0, 0, 1}); }

double Homography::determinant() const { return to_eigen(m_).determinant(); }

Homography Homography::inverse() const { return Homography(from_eigen(to_eigen(m_).inverse())); }

Homography operator*(const Homography& a, const Homography& b) {
    return Homography(from_eigen(to_eigen(a.m_) * to_eigen(b.m_)));
}

Point2D apply_homography(const Homography& h, Point2D p) {
    const double w = h(2, 0) * p.x + h(2, 1) * p.y + h(2, 2);
    if (std::abs(w) < kInfinityDenominator) throw EstimationError("point maps to infinity under the homography");
    return {(h(0, 0) * p.x + h(0, 1) * p.y + h(0, 2)) / w, (h(1, 0) * p.x + h(1, 1) * p.y + h(1, 2)) / w};
}

Homography fit_homography_dlt(std::span<const Correspondence> matches) {
    if (matches.size() < 4) throw EstimationError("homography needs at least 4 correspondences");
    if (matches.size() == 4 && degenerate_sample(matches)) {
        throw EstimationError("degenerate sample: three collinear points");
    }
    std::vector<Point2D> src(matches.size());
    std::vector<Point2D> dst(matches.size());
    for (std::size_t i = 0; i < matches.size(); ++i) {
        src[i] = matches[i].source;
        dst[i] = matches[i].target;
    }
    const Mat3 ts = hartley_transform(src);
    const Mat3 td = hartley_transform(dst);

    Eigen::MatrixXd a(static_cast<Eigen::Index>(2 * matches.size()), 9);
    for (std::size_t i = 0; i < matches.size(); ++i) {
        const Eigen::Vector3d s = ts * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
        const Eigen::Vector3d d = td * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
        const double x = s.x() / s.z();
        const double y = s.y() / s.z();
        const double u = d.x() / d.z();
        const double v = d.y() / d.z();
        const auto r = static_cast<Eigen::Index>(2 * i);
        a.row(r) << -x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u;
        a.row(r + 1) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Mat3 hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    const Mat3 full = td.inverse() * hn * ts;
    try {
        return Homography(from_eigen(full));
    } catch (const ValidationError& e) {
        throw EstimationError(std::string("degenerate DLT solution: ") + e.what());
    }
}

HomographyEstimate estimate_homography(std::span<const Correspondence> matches, const RansacOptions& options) {
    const std::size_t n = matches.size();
    if (n < 4) throw EstimationError("estimate_homography needs at least 4 matches, got " + std::to_string(n));
    if (!(options.threshold_px > 0.0)) throw ValidationError("RANSAC threshold must be positive");
    if (options.max_iters <= 0) throw ValidationError("RANSAC max_iters must be positive");

    // Canonical order: sampling sees the same list whatever the input order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& p = matches[a];
        const auto& q = matches[b];
        return std::tie(p.source.x, p.source.y, p.target.x, p.target.y) <
               std::tie(q.source.x, q.source.y, q.target.x, q.target.y);
    });
    std::vector<Correspondence> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = matches[order[i]];

    const CounterRng rng(options.seed);
    std::optional<Homography> best;
    Score best_score;
    HomographyEstimate out;
    std::array<Correspondence, 4> sample{};
    for (int it = 0; it < options.max_iters; ++it) {
        // Floyd's algorithm: 4 distinct indices from exactly 4 draws.
        std::array<std::size_t, 4> picked{};
        std::size_t count = 0;
        for (std::size_t j = n - 4; j < n; ++j) {
            const std::size_t t = rng.below(static_cast<std::uint64_t>(it) * 4 + (j - (n - 4)), j + 1);
            const bool seen = std::find(picked.begin(), picked.begin() + count, t) != picked.begin() + count;
            picked[count++] = seen ? j : t;
        }
        for (std::size_t k = 0; k < 4; ++k) sample[k] = sorted[picked[k]];
        if (degenerate_sample(sample)) {
            ++out.degenerate_samples;
            continue;
        }
        Homography h;
        try {
            h = fit_homography_dlt(sample);
        } catch (const EstimationError&) {
            ++out.degenerate_samples;
            continue;
        }
        const Score s = score_model(h, sorted, options.threshold_px, nullptr);
        if (!best || s.better_than(best_score)) {
            best = h;
            best_score = s;
        }
    }
    if (!best) throw EstimationError("every RANSAC sample was degenerate");

    // Least-squares refit on the consensus set until the set stops changing.
    // The refit replaces the sample model even when it admits fewer marginal
    // points: its error is averaged over every inlier.
    std::vector<bool> mask;
    score_model(*best, sorted, options.threshold_px, &mask);
    for (int round = 0; round < kRefitRounds; ++round) {
        std::vector<Correspondence> inliers;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask[i]) inliers.push_back(sorted[i]);
        }
        Homography refit;
        try {
            refit = fit_homography_dlt(inliers);
        } catch (const EstimationError&) {
            break;
        }
        std::vector<bool> refit_mask;
        const Score s = score_model(refit, sorted, options.threshold_px, &refit_mask);
        if (s.count < 4) break;
        best = refit;
        best_score = s;
        const bool settled = refit_mask == mask;
        mask = std::move(refit_mask);
        if (settled) break;
    }

    out.homography = *best;
    out.inlier_count = best_score.count;
    out.inliers.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) out.inliers[order[i]] = mask[i];
    return out;
}

double mean_corner_error(const Homography& estimate, const Homography& truth, Dims reference) {
    if (reference.height <= 0 || reference.width <= 0) throw ValidationError("reference dims must be positive");
    const double w = reference.width - 1;
    const double h = reference.height - 1;
    const Point2D corners[] = {{0, 0}, {w, 0}, {0, h}, {w, h}};
    double sum = 0.0;
    for (const auto& c : corners) {
        const Point2D a = apply_homography(estimate, c);
        const Point2D b = apply_homography(truth, c);
        sum += std::hypot(a.x - b.x, a.y - b.y);
    }
    return sum / 4.0;
}

CornerAccuracy corner_accuracy(const Homography& estimate, const Homography& truth, Dims reference,
                               std::span<const double> epsilons) {
    CornerAccuracy out;
    out.mean_error = mean_corner_error(estimate, truth, reference);
    for (double eps : epsilons) out.correct[eps] = out.mean_error <= eps;
    return out;
}

}  // namespace dift
