#include <gtest/gtest.h>

#include <random>

#include "decaug/annotations.hpp"
#include "decaug/bitmask.hpp"
#include "decaug/morphology.hpp"
#include "decaug/rle.hpp"
#include "oracles.hpp"

using namespace decaug;

TEST(BitMask, BoundsAreTight) {
    BitMask m(10, 8);
    EXPECT_FALSE(m.bounds());
    m.set(3, 2);
    m.set(6, 5);
    auto b = m.bounds();
    ASSERT_TRUE(b);
    EXPECT_EQ(b->x, 3);
    EXPECT_EQ(b->y, 2);
    EXPECT_EQ(b->w, 4);
    EXPECT_EQ(b->h, 4);
    EXPECT_EQ(m.area(), 2u);
}

TEST(BitMask, TranslateDropsPixelsLeavingTheFrame) {
    BitMask m(4, 4);
    m.set(0, 0);
    m.set(3, 3);
    BitMask t = m.translated(1, 1);
    EXPECT_TRUE(t.get(1, 1));
    EXPECT_EQ(t.area(), 1u);
}

TEST(Morphology, DilateAndErodeMatchBruteForce) {
    std::mt19937_64 g(11);
    for (int trial = 0; trial < 30; ++trial) {
        const int w = 8 + static_cast<int>(g() % 40), h = 8 + static_cast<int>(g() % 40);
        BitMask m = oracle::random_blob(g, w, h);
        for (int r : {1, 2, 3, 4}) {
            EXPECT_EQ(morph::dilate(m, r), oracle::dilate(m, r)) << "trial " << trial << " r " << r;
            EXPECT_EQ(morph::erode(m, r), oracle::erode(m, r)) << "trial " << trial << " r " << r;
        }
    }
}

TEST(Morphology, ErosionTreatsFrameExteriorAsBackground) {
    BitMask full(5, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) full.set(x, y);
    BitMask e = morph::erode(full, 1);
    EXPECT_EQ(e.area(), 9u);
    EXPECT_FALSE(e.get(0, 2));
}

TEST(Rle, AllZeroRunIsEmpty) {
    BitMask m = rle::decode_counts({48}, 8, 6);
    EXPECT_EQ(m.area(), 0u);
}

TEST(Rle, OverflowIsRejected) {
    EXPECT_THROW(rle::decode_counts({10, 39}, 8, 6), DecodeError);
    EXPECT_THROW(rle::decode_counts({49}, 8, 6), DecodeError);
}

TEST(Rle, IsColumnMajor) {
    // Skip the first column (3 px), then set 2 px: (1,0) and (1,1).
    BitMask m = rle::decode_counts({3, 2, 7}, 4, 3);
    EXPECT_TRUE(m.get(1, 0));
    EXPECT_TRUE(m.get(1, 1));
    EXPECT_FALSE(m.get(2, 0));
    EXPECT_EQ(m.area(), 2u);
}

TEST(Rle, EncodeDecodeMatchesOracle) {
    std::mt19937_64 g(5);
    for (int trial = 0; trial < 40; ++trial) {
        const int w = 1 + static_cast<int>(g() % 64), h = 1 + static_cast<int>(g() % 64);
        BitMask m = oracle::random_blob(g, w, h, 1 + static_cast<int>(g() % 4));
        auto counts = rle::encode_counts(m);
        EXPECT_EQ(oracle::rle_decode(counts, w, h), m);
        EXPECT_EQ(rle::decode_counts(counts, w, h), m);
        EXPECT_EQ(rle::counts_from_string(rle::counts_to_string(counts)), counts);
    }
}

TEST(Rle, CompressedStringKnownValue) {
    // Small runs encode as one character each: value + 48.
    auto counts = rle::counts_from_string("327");
    EXPECT_EQ(counts, (std::vector<std::uint64_t>{3, 2, 7}));
    EXPECT_EQ(rle::counts_to_string({3, 2, 7}), "327");
    // Large and delta-coded values survive a round trip.
    std::vector<std::uint64_t> big{0, 307200, 5, 1000000, 17, 2};
    EXPECT_EQ(rle::counts_from_string(rle::counts_to_string(big)), big);
}

TEST(Rle, MalformedStringIsRejected) {
    EXPECT_THROW(rle::counts_from_string("\x7f"), DecodeError);
    EXPECT_THROW(rle::counts_from_string("P"), DecodeError);  // continuation bit with no follow-up
}

TEST(Polygon, RectangleOnEightByEight) {
    std::vector<std::vector<double>> rings{{2, 2, 5, 2, 5, 6, 2, 6}};
    BitMask m = rle::fill_polygons(rings, 8, 8);
    EXPECT_EQ(m.area(), 12u);
    EXPECT_EQ(m, oracle::polygon_fill(rings, 8, 8));
}

TEST(Polygon, RandomPolygonsMatchPointInPolygonOracle) {
    std::mt19937_64 g(17);
    std::uniform_real_distribution<double> coord(-4.0, 68.0);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<std::vector<double>> rings(1 + g() % 2);
        for (auto& r : rings) {
            const int n = 3 + static_cast<int>(g() % 8);
            for (int i = 0; i < 2 * n; ++i) r.push_back(std::round(coord(g) * 100.0) / 100.0 + 0.003);
        }
        const int w = 16 + static_cast<int>(g() % 49), h = 16 + static_cast<int>(g() % 49);
        EXPECT_EQ(rle::fill_polygons(rings, w, h), oracle::polygon_fill(rings, w, h)) << "trial " << trial;
    }
}

TEST(Polygon, OddCoordinateCountIsRejected) {
    EXPECT_THROW(rle::fill_polygons({{1, 1, 4, 1, 4}}, 8, 8), DecodeError);
}

TEST(DecodeMask, DispatchesOnPayloadShape) {
    nlohmann::json rle = {{"size", {3, 4}}, {"counts", {3, 2, 7}}};
    nlohmann::json str = {{"size", {3, 4}}, {"counts", "327"}};
    nlohmann::json poly = nlohmann::json::array({{1.0, 0.0, 3.0, 0.0, 3.0, 2.0, 1.0, 2.0}});
    EXPECT_EQ(decode_mask(rle, 4, 3), decode_mask(str, 4, 3));
    EXPECT_EQ(decode_mask(poly, 4, 3).area(), 4u);
    EXPECT_THROW(decode_mask(nlohmann::json(5), 4, 3), SchemaError);
    EXPECT_THROW(decode_mask({{"size", {4, 4}}, {"counts", {16}}}, 4, 3), GeometryError);
}
