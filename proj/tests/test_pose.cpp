#include <gtest/gtest.h>

#include <random>

#include "json.hpp"

#include "decaug/pose.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace decaug;

namespace {

Keypoints upright() {
    Keypoints kp{};
    kp[keypoint::kLeftShoulder] = {40, 0, 2};
    kp[keypoint::kRightShoulder] = {60, 0, 2};
    kp[keypoint::kLeftHip] = {42, 100, 2};
    kp[keypoint::kRightHip] = {58, 100, 2};
    kp[0] = {50, -30, 2};
    return kp;
}

Instance human_with(const Keypoints& kp, int w = 640, int h = 480) {
    Instance inst = oracle::make_instance(1, BitMask(w, h), true);
    inst.mask.set(0, 0);
    inst.keypoints = kp;
    return inst;
}

Instance object_at(double cx, double cy, int w = 640, int h = 480) {
    Instance o = oracle::make_instance(2, BitMask(w, h));
    o.bbox = {static_cast<int>(cx - 5), static_cast<int>(cy - 3), 10, 6};
    return o;
}

}  // namespace

TEST(NormalizePose, UprightTorso) {
    auto pose = normalize_pose(upright(), 1000.0);
    ASSERT_TRUE(pose);
    EXPECT_DOUBLE_EQ(pose->torso_length, 100.0);
    EXPECT_DOUBLE_EQ(pose->center.x, 50.0);
    EXPECT_DOUBLE_EQ(pose->center.y, 50.0);
    const Vec2 hips = (pose->points[keypoint::kLeftHip] + pose->points[keypoint::kRightHip]) / 2.0;
    const Vec2 shoulders = (pose->points[keypoint::kLeftShoulder] + pose->points[keypoint::kRightShoulder]) / 2.0;
    EXPECT_NEAR((hips - shoulders).norm(), 1.0, 1e-12);
    EXPECT_NEAR(pose->points[0].y, -0.8, 1e-12);
    EXPECT_FALSE(pose->valid[3]);
    EXPECT_TRUE(pose->valid[0]);
}

TEST(NormalizePose, CenterIsMeanOfVisibleTorsoJoints) {
    Keypoints kp = upright();
    kp[keypoint::kRightHip].visibility = 0;
    auto pose = normalize_pose(kp, 1000.0);
    ASSERT_TRUE(pose);
    EXPECT_DOUBLE_EQ(pose->center.x, (40 + 60 + 42) / 3.0);
    EXPECT_DOUBLE_EQ(pose->center.y, 100 / 3.0);
    EXPECT_DOUBLE_EQ(pose->torso_length, std::hypot(8.0, 100.0));
}

TEST(NormalizePose, Unnormalizable) {
    EXPECT_FALSE(normalize_pose(Keypoints{}, 1000.0));

    Keypoints no_hips = upright();
    no_hips[keypoint::kLeftHip].visibility = 0;
    no_hips[keypoint::kRightHip].visibility = 0;
    EXPECT_FALSE(normalize_pose(no_hips, 1000.0));

    Keypoints no_shoulders = upright();
    no_shoulders[keypoint::kLeftShoulder].visibility = 0;
    no_shoulders[keypoint::kRightShoulder].visibility = 0;
    EXPECT_FALSE(normalize_pose(no_shoulders, 1000.0));

    Keypoints collapsed = upright();
    for (int j : {5, 6, 11, 12}) collapsed[j] = {50, 50, 2};
    EXPECT_FALSE(normalize_pose(collapsed, 1000.0));

    // 1e-6 of the diagonal is the floor.
    Keypoints tiny = oracle::scaled(upright(), 1e-5);
    EXPECT_TRUE(normalize_pose(tiny, 100.0));
    EXPECT_FALSE(normalize_pose(tiny, 1e4));

    Instance h = human_with(Keypoints{});
    EXPECT_THROW(offset_vector(h, object_at(10, 10)), Unnormalizable);
    h.keypoints.reset();
    EXPECT_THROW(offset_vector(h, object_at(10, 10)), Unnormalizable);
}

TEST(NormalizePose, ScaleAndTranslationInvariance) {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> pos(50, 500), size(20, 150), s(0.25, 4.0), t(-300, 300);
    for (int trial = 0; trial < 100; ++trial) {
        const Keypoints kp = oracle::random_keypoints(g, pos(g), pos(g), size(g));
        const double k = s(g), tx = t(g), ty = t(g);
        auto a = normalize_pose(kp, 800.0);
        auto b = normalize_pose(oracle::scaled(kp, k, tx, ty), 800.0 * k);
        ASSERT_TRUE(a && b);
        EXPECT_EQ(a->valid, b->valid);
        for (int j = 0; j < kNumKeypoints; ++j) {
            if (!a->valid[j]) continue;
            EXPECT_NEAR(a->points[j].x, b->points[j].x, 1e-9);
            EXPECT_NEAR(a->points[j].y, b->points[j].y, 1e-9);
        }

        const Vec2 obj{pos(g), pos(g)};
        const Vec2 va = normalize_offset({obj - a->center, OffsetFrame::Pixel}, *a).v;
        const Vec2 vb = normalize_offset({obj * k + Vec2{tx, ty} - b->center, OffsetFrame::Pixel}, *b).v;
        EXPECT_NEAR(va.x, vb.x, 1e-9);
        EXPECT_NEAR(va.y, vb.y, 1e-9);
    }
}

TEST(NormalizePose, PixelRoundTrip) {
    auto pose = normalize_pose(upright(), 1000.0);
    ASSERT_TRUE(pose);
    const Vec2 p{123.25, -7.5};
    const Vec2 back = pose->to_pixels(pose->to_normalized(p));
    EXPECT_NEAR(back.x, p.x, 1e-12);
    EXPECT_NEAR(back.y, p.y, 1e-12);
}

TEST(OffsetVector, Arithmetic) {
    Keypoints kp = oracle::scaled(upright(), 1.0, 50, 50);  // torso centre (100, 100)
    Instance h = human_with(kp);
    OffsetVector v = offset_vector(h, object_at(160, 80));
    EXPECT_EQ(v.frame, OffsetFrame::Pixel);
    EXPECT_DOUBLE_EQ(v.v.x, 60.0);
    EXPECT_DOUBLE_EQ(v.v.y, -20.0);

    OffsetVector zero = offset_vector(h, object_at(100, 100));
    EXPECT_DOUBLE_EQ(zero.v.x, 0.0);
    EXPECT_DOUBLE_EQ(zero.v.y, 0.0);

    auto pose = normalize_pose(h);
    OffsetVector n = normalize_offset(v, *pose);
    EXPECT_EQ(n.frame, OffsetFrame::Normalized);
    EXPECT_DOUBLE_EQ(n.v.x, 0.6);
    EXPECT_DOUBLE_EQ(n.v.y, -0.2);
}

TEST(OffsetVector, FixturePairFromRawJson) {
    const auto raw = nlohmann::json::parse(support::slurp(support::fixture_json()));
    const auto& ds = support::fixture();
    auto ann = [&](std::int64_t id) -> const nlohmann::json& {
        for (const auto& a : raw["annotations"])
            if (a["id"] == id) return a;
        throw std::runtime_error("missing annotation");
    };
    int checked = 0;
    for (const auto& t : raw["hoi_annotations"]) {
        if (t["object_ann_id"].is_null()) continue;
        const auto& hj = ann(t["human_ann_id"]);
        const auto& oj = ann(t["object_ann_id"]);
        if (!oj.contains("bbox")) continue;
        const auto kp = hj["keypoints"].get<std::vector<double>>();
        double sx = 0, sy = 0;
        int n = 0;
        for (int j : {5, 6, 11, 12})
            if (kp[3 * j + 2] > 0) {
                sx += kp[3 * j];
                sy += kp[3 * j + 1];
                ++n;
            }
        if (n < 4) continue;
        const auto b = oj["bbox"].get<std::vector<double>>();
        const double want_x = b[0] + b[2] / 2 - sx / n, want_y = b[1] + b[3] / 2 - sy / n;

        const Instance* h = ds.find_instance(InstanceId(hj["id"].get<std::int64_t>()));
        const Instance* o = ds.find_instance(InstanceId(oj["id"].get<std::int64_t>()));
        ASSERT_TRUE(h && o);
        OffsetVector v = offset_vector(*h, *o);
        EXPECT_NEAR(v.v.x, want_x, 1e-9);
        EXPECT_NEAR(v.v.y, want_y, 1e-9);
        ++checked;
    }
    EXPECT_GE(checked, 5);
}

TEST(PoseFeature, InvalidJointsImputedAtOrigin) {
    Keypoints kp = upright();
    kp[0].visibility = 0;
    auto pose = normalize_pose(kp, 1000.0);
    PoseFeature f = pose_feature(*pose);
    EXPECT_EQ(f.values[0], 0.0);
    EXPECT_EQ(f.values[1], 0.0);
    EXPECT_FALSE(f.valid[0]);
    EXPECT_TRUE(f.valid[keypoint::kLeftHip]);
    EXPECT_DOUBLE_EQ(f.values[2 * keypoint::kLeftHip + 1], 0.5);
}

TEST(PoseFeature, MaskedDistance) {
    PoseFeature a, b;
    a.valid.fill(true);
    b.valid.fill(true);
    EXPECT_EQ(masked_sq_distance(a, b), 0.0);
    b.values[0] = 3.0;
    b.values[1] = 4.0;
    EXPECT_DOUBLE_EQ(masked_sq_distance(a, b), 25.0);
    EXPECT_DOUBLE_EQ(masked_sq_distance(b, a), 25.0);

    // Only mutually valid joints count; the sum is rescaled to all 34 dimensions.
    b.valid.fill(false);
    b.valid[0] = true;
    EXPECT_DOUBLE_EQ(masked_sq_distance(a, b), 25.0 * 17);
    b.valid[0] = false;
    EXPECT_TRUE(std::isinf(masked_sq_distance(a, b)));
}
