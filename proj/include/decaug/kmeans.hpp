#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "decaug/pose.hpp"
#include "decaug/rng.hpp"

namespace decaug {

/// k-means++ seeding: first centre uniform, then each next centre drawn with
/// probability proportional to its squared distance to the nearest chosen centre.
/// Stops early when every remaining point coincides with a chosen centre, so the
/// result may hold fewer than k indices.
template <typename Point, typename SqDist>
std::vector<std::size_t> kmeanspp_seed(std::span<const Point> points, std::size_t k, SqDist sq_dist, Rng& rng) {
    std::vector<std::size_t> chosen;
    if (points.empty() || k == 0) return chosen;
    chosen.push_back(static_cast<std::size_t>(uniform_index(rng, points.size())));
    std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
    while (chosen.size() < k) {
        const Point& last = points[chosen.back()];
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double d = sq_dist(points[i], last);
            if (!std::isfinite(d)) d = std::numeric_limits<double>::max() / (4.0 * points.size());
            if (d < nearest[i]) nearest[i] = d;
            total += nearest[i];
        }
        if (!(total > 0.0)) break;
        double u = uniform01(rng) * total;
        std::size_t pick = points.size() - 1;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (nearest[i] <= 0.0) continue;
            if (u < nearest[i]) {
                pick = i;
                break;
            }
            u -= nearest[i];
        }
        while (nearest[pick] <= 0.0) --pick;  // rounding fell off the end
        chosen.push_back(pick);
    }
    return chosen;
}

struct PoseClustering {
    std::vector<PoseFeature> centroids;  // fully valid
    std::vector<int> assignment;         // centroid index per input pose
    double distortion = 0.0;             // mean squared masked distance to the assigned centroid
    int iterations = 0;
};

struct KMeansOptions {
    std::size_t k = 42;
    int max_iterations = 100;
    double tolerance = 1e-6;  // stop once no centroid moves further than this
};

namespace detail {
inline std::pair<int, double> nearest_centroid(const PoseFeature& p, const std::vector<PoseFeature>& centroids) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = masked_sq_distance(p, centroids[c]);
        if (d < best_d || best < 0) {
            best = static_cast<int>(c);
            best_d = d;
        }
    }
    return {best, best_d};
}
}  // namespace detail

/// Lloyd iterations over pose features with masked distances. Centroid keypoints are
/// averaged over the members where that keypoint is valid; empty clusters keep their
/// previous centre.
inline PoseClustering cluster_poses(std::span<const PoseFeature> poses, const KMeansOptions& opts, Rng& rng) {
    PoseClustering out;
    if (poses.empty()) return out;
    const std::size_t k = std::min(opts.k, poses.size());
    for (std::size_t i : kmeanspp_seed(poses, k, masked_sq_distance, rng)) {
        PoseFeature c = poses[i];
        c.valid.fill(true);  // missing joints stay at the imputed origin
        out.centroids.push_back(c);
    }
    out.assignment.assign(poses.size(), 0);

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        out.iterations = iter + 1;
        for (std::size_t i = 0; i < poses.size(); ++i) out.assignment[i] = detail::nearest_centroid(poses[i], out.centroids).first;

        std::vector<std::array<double, kPoseDims>> sums(out.centroids.size());
        std::vector<std::array<int, kNumKeypoints>> counts(out.centroids.size());
        for (auto& s : sums) s.fill(0.0);
        for (auto& c : counts) c.fill(0);
        for (std::size_t i = 0; i < poses.size(); ++i) {
            const auto c = static_cast<std::size_t>(out.assignment[i]);
            for (int j = 0; j < kNumKeypoints; ++j)
                if (poses[i].valid[j]) {
                    sums[c][2 * j] += poses[i].values[2 * j];
                    sums[c][2 * j + 1] += poses[i].values[2 * j + 1];
                    ++counts[c][j];
                }
        }
        double max_move = 0.0;
        for (std::size_t c = 0; c < out.centroids.size(); ++c) {
            PoseFeature next = out.centroids[c];
            for (int j = 0; j < kNumKeypoints; ++j)
                if (counts[c][j] > 0) {
                    next.values[2 * j] = sums[c][2 * j] / counts[c][j];
                    next.values[2 * j + 1] = sums[c][2 * j + 1] / counts[c][j];
                }
            double move = 0.0;
            for (int d = 0; d < kPoseDims; ++d) {
                const double diff = next.values[d] - out.centroids[c].values[d];
                move += diff * diff;
            }
            max_move = std::max(max_move, std::sqrt(move));
            out.centroids[c] = next;
        }
        if (max_move < opts.tolerance) break;
    }

    double total = 0.0;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        auto [c, d] = detail::nearest_centroid(poses[i], out.centroids);
        out.assignment[i] = c;
        total += std::isfinite(d) ? d : 0.0;
    }
    out.distortion = total / static_cast<double>(poses.size());
    return out;
}

}  // namespace decaug
