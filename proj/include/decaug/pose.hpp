#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "decaug/annotations.hpp"
#include "decaug/errors.hpp"

namespace decaug {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
    friend Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
    double norm() const { return std::hypot(x, y); }
};

// COCO keypoint order.
namespace keypoint {
inline constexpr int kLeftShoulder = 5;
inline constexpr int kRightShoulder = 6;
inline constexpr int kLeftHip = 11;
inline constexpr int kRightHip = 12;
}  // namespace keypoint

/// Torso-centred, torso-length-scaled pose. `center` and `torso_length` keep the
/// pixel frame so offsets can be mapped back.
struct NormalizedPose {
    std::array<Vec2, kNumKeypoints> points{};
    std::array<bool, kNumKeypoints> valid{};
    Vec2 center;
    double torso_length = 1.0;

    Vec2 to_pixels(Vec2 normalized) const { return center + normalized * torso_length; }
    Vec2 to_normalized(Vec2 pixel) const { return (pixel - center) / torso_length; }
};

/// Torso centre is the mean of the visible shoulders and hips; torso length is the
/// distance between the shoulder midpoint and the hip midpoint. nullopt when no
/// shoulder or no hip is visible, or the torso is shorter than 1e-6 of the image diagonal.
inline std::optional<NormalizedPose> normalize_pose(const Keypoints& kp, double image_diagonal) {
    using namespace keypoint;
    auto mid = [&](int a, int b) -> std::optional<Vec2> {
        if (kp[a].visible() && kp[b].visible()) return Vec2{(kp[a].x + kp[b].x) / 2, (kp[a].y + kp[b].y) / 2};
        if (kp[a].visible()) return Vec2{kp[a].x, kp[a].y};
        if (kp[b].visible()) return Vec2{kp[b].x, kp[b].y};
        return std::nullopt;
    };
    auto shoulders = mid(kLeftShoulder, kRightShoulder);
    auto hips = mid(kLeftHip, kRightHip);
    if (!shoulders || !hips) return std::nullopt;

    Vec2 sum;
    int n = 0;
    for (int i : {kLeftShoulder, kRightShoulder, kLeftHip, kRightHip})
        if (kp[i].visible()) {
            sum = sum + Vec2{kp[i].x, kp[i].y};
            ++n;
        }
    NormalizedPose pose;
    pose.center = sum / n;
    pose.torso_length = (*shoulders - *hips).norm();
    if (!(pose.torso_length >= 1e-6 * image_diagonal) || pose.torso_length <= 0.0) return std::nullopt;
    for (int i = 0; i < kNumKeypoints; ++i) {
        pose.valid[i] = kp[i].visible();
        if (pose.valid[i]) pose.points[i] = pose.to_normalized({kp[i].x, kp[i].y});
    }
    return pose;
}

inline double image_diagonal(int width, int height) { return std::hypot(width, height); }

inline std::optional<NormalizedPose> normalize_pose(const Instance& human) {
    if (!human.keypoints) return std::nullopt;
    return normalize_pose(*human.keypoints, image_diagonal(human.mask.width(), human.mask.height()));
}

enum class OffsetFrame { Pixel, Normalized };

struct OffsetVector {
    Vec2 v;
    OffsetFrame frame = OffsetFrame::Pixel;
};

/// Object bbox centre minus human torso centre, in pixels.
inline OffsetVector offset_vector(const Instance& human, const Instance& object) {
    auto pose = normalize_pose(human);
    if (!pose) throw Unnormalizable("human " + std::to_string(human.id.value) + " has no normalizable torso");
    return {Vec2{object.bbox.center_x(), object.bbox.center_y()} - pose->center, OffsetFrame::Pixel};
}

inline OffsetVector normalize_offset(const OffsetVector& pixel, const NormalizedPose& pose) {
    return {pixel.v / pose.torso_length, OffsetFrame::Normalized};
}

// ---------------------------------------------------------------------------------
// Pose features

inline constexpr int kPoseDims = 2 * kNumKeypoints;

/// Concatenated normalized keypoints; invalid keypoints hold (0, 0).
struct PoseFeature {
    std::array<double, kPoseDims> values{};
    std::array<bool, kNumKeypoints> valid{};

    friend bool operator==(const PoseFeature&, const PoseFeature&) = default;
};

inline PoseFeature pose_feature(const NormalizedPose& pose) {
    PoseFeature f;
    for (int i = 0; i < kNumKeypoints; ++i) {
        f.valid[i] = pose.valid[i];
        if (pose.valid[i]) {
            f.values[2 * i] = pose.points[i].x;
            f.values[2 * i + 1] = pose.points[i].y;
        }
    }
    return f;
}

/// Squared distance over mutually valid keypoints, rescaled to the full dimension
/// count. Infinity when nothing overlaps.
inline double masked_sq_distance(const PoseFeature& a, const PoseFeature& b) {
    double sum = 0.0;
    int dims = 0;
    for (int i = 0; i < kNumKeypoints; ++i) {
        if (!a.valid[i] || !b.valid[i]) continue;
        const double dx = a.values[2 * i] - b.values[2 * i];
        const double dy = a.values[2 * i + 1] - b.values[2 * i + 1];
        sum += dx * dx + dy * dy;
        dims += 2;
    }
    if (dims == 0) return std::numeric_limits<double>::infinity();
    return sum * (static_cast<double>(kPoseDims) / dims);
}

}  // namespace decaug
