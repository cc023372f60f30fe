#include <gtest/gtest.h>

#include <random>

#include "decaug/mask_algebra.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace decaug;

namespace {

std::vector<Instance> random_scene(std::mt19937_64& g, int w, int h, int n) {
    std::vector<Instance> out;
    for (int i = 0; i < n; ++i) out.push_back(oracle::make_instance(i + 1, oracle::random_blob(g, w, h, 2), i == 0));
    return out;
}

}  // namespace

TEST(Contour, BandStraddlesTheEdge) {
    BitMask m(20, 20);
    for (int y = 5; y < 15; ++y)
        for (int x = 5; x < 15; ++x) m.set(x, y);
    BitMask band = contour_band(m, 2);
    EXPECT_TRUE(band.get(5, 10));   // inside, on the edge
    EXPECT_TRUE(band.get(3, 10));   // outside, within 2
    EXPECT_FALSE(band.get(10, 10)); // deep interior
    EXPECT_FALSE(band.get(2, 10));  // beyond reach
    EXPECT_EQ(band, oracle::contour(m, 2));
    EXPECT_THROW(contour_band(BitMask(4, 4), 1), EmptyMask);
}

TEST(InterlockingRatio, MatchesPixelOracle) {
    std::mt19937_64 g(3);
    for (int trial = 0; trial < 60; ++trial) {
        const int w = 12 + static_cast<int>(g() % 53), h = 12 + static_cast<int>(g() % 53);
        BitMask a = oracle::random_blob(g, w, h), b = oracle::random_blob(g, w, h);
        for (int width : {1, 3}) {
            auto want = oracle::interlock(a, b, width);
            Instance ia = oracle::make_instance(1, a), ib = oracle::make_instance(2, b);
            auto got = interlock_counts(ia, ib, width);
            EXPECT_EQ(got.u, want.u);
            EXPECT_EQ(got.v, want.v);
            const double r = want.v == 0 ? 0.0 : static_cast<double>(want.u) / static_cast<double>(want.v);
            EXPECT_EQ(interlocking_ratio(ia, ib, width), r);
        }
    }
}

TEST(InterlockingRatio, IsSymmetricAndZeroForDistantMasks) {
    std::mt19937_64 g(9);
    BitMask a(64, 64), b(64, 64);
    for (int y = 2; y < 10; ++y)
        for (int x = 2; x < 10; ++x) a.set(x, y);
    for (int y = 40; y < 50; ++y)
        for (int x = 40; x < 60; ++x) b.set(x, y);
    Instance ia = oracle::make_instance(1, a), ib = oracle::make_instance(2, b);
    EXPECT_EQ(interlocking_ratio(ia, ib, 3), 0.0);
    for (int trial = 0; trial < 10; ++trial) {
        Instance x = oracle::make_instance(1, oracle::random_blob(g, 40, 40));
        Instance y = oracle::make_instance(2, oracle::random_blob(g, 40, 40));
        EXPECT_EQ(interlocking_ratio(x, y, 3), interlocking_ratio(y, x, 3));
    }
}

TEST(InterlockTable, AgreesWithDirectCounts) {
    std::mt19937_64 g(21);
    for (int trial = 0; trial < 8; ++trial) {
        auto scene = random_scene(g, 64, 48, 5);
        InterlockTable table(scene, 3);
        for (std::size_t i = 0; i < scene.size(); ++i)
            for (std::size_t j = 0; j < scene.size(); ++j) {
                if (i == j) continue;
                auto want = oracle::interlock(scene[i].mask, scene[j].mask, 3);
                EXPECT_EQ(table.at(i, j).u, want.u);
                EXPECT_EQ(table.at(i, j).v, want.v);
            }
    }
}

TEST(ReplaceableSet, MonotoneInThreshold) {
    std::mt19937_64 g(33);
    const double grid[] = {0.0, 0.05, 0.1, 0.2, 1.0};
    for (int trial = 0; trial < 20; ++trial) {
        auto scene = random_scene(g, 48, 48, 2 + static_cast<int>(g() % 5));
        InterlockTable table(scene, 3);
        std::vector<InstanceId> prev;
        for (double t : grid) {
            auto cur = replaceable_set(table, scene, t);
            EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end())) << "t " << t;
            for (InstanceId id : cur) EXPECT_NE(id, scene[0].id) << "humans are never replaceable";
            prev = cur;
        }
    }
}

TEST(ReplaceableSet, ThresholdSemantics) {
    std::mt19937_64 g(2);
    auto scene = random_scene(g, 48, 48, 4);
    EXPECT_TRUE(replaceable_set(scene, 0.0, 3).empty());
    InterlockTable table(scene, 3);
    for (std::size_t i = 1; i < scene.size(); ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < scene.size(); ++j)
            if (j != i) worst = std::max(worst, table.ratio(i, j));
        auto below = replaceable_set(table, scene, std::nextafter(worst, 2.0));
        auto at = replaceable_set(table, scene, worst);
        EXPECT_TRUE(std::binary_search(below.begin(), below.end(), scene[i].id));
        if (worst > 0.0) {
            EXPECT_FALSE(std::binary_search(at.begin(), at.end(), scene[i].id));
        }
    }
}

TEST(ReplaceableSet, LoneObjectIsReplaceable) {
    BitMask m(10, 10);
    m.set(4, 4);
    std::vector<Instance> one{oracle::make_instance(5, m)};
    EXPECT_EQ(replaceable_set(one, kDefaultInterlockThreshold, 3), std::vector<InstanceId>{InstanceId(5)});
}

TEST(ReplaceableSet, FixtureVetoesTheInterlockedObjects) {
    const Dataset& ds = support::fixture();
    std::size_t vetoed = 0;
    for (const auto& img : ds.images) {
        std::vector<Instance> inst;
        for (std::size_t i : ds.instances_of(img.id)) inst.push_back(ds.instances[i]);
        std::size_t objects = 0;
        for (const auto& i : inst) objects += !i.is_human;
        vetoed += objects - replaceable_set(inst, kDefaultInterlockThreshold, kDefaultContourWidth).size();
    }
    EXPECT_GE(vetoed, 2u);
}

TEST(StateMatrix, MatchesOracleOnRandomScenes) {
    std::mt19937_64 g(41);
    for (int trial = 0; trial < 20; ++trial) {
        auto scene = random_scene(g, 40, 40, 4);
        for (const auto& target : scene) {
            ObjectStateMatrix e = state_matrix(target, scene);
            EXPECT_EQ(e.width, target.bbox.w);
            EXPECT_EQ(e.height, target.bbox.h);
            auto want = oracle::state_cells(target, scene);
            ASSERT_EQ(e.cells.size(), want.size());
            for (std::size_t k = 0; k < want.size(); ++k) EXPECT_EQ(e.cells[k], want[k]);
        }
    }
}

TEST(StateDistance, MatchesResizeAndSumOracle) {
    std::mt19937_64 g(43);
    std::uniform_int_distribution<int> dim(1, 40), cell(-1, 1);
    for (int trial = 0; trial < 80; ++trial) {
        ObjectStateMatrix a{dim(g), dim(g), {}}, b{dim(g), dim(g), {}};
        for (int k = 0; k < a.width * a.height; ++k) a.cells.push_back(static_cast<std::int8_t>(cell(g)));
        for (int k = 0; k < b.width * b.height; ++k) b.cells.push_back(static_cast<std::int8_t>(cell(g)));
        std::vector<int> ca(a.cells.begin(), a.cells.end()), cb(b.cells.begin(), b.cells.end());
        const double d = state_distance(a, b);
        EXPECT_EQ(d, oracle::state_distance(ca, a.width, a.height, cb, b.width, b.height));
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 2.0);
        EXPECT_EQ(state_distance(a, a), 0.0);
    }
}

TEST(StateDistance, KnownValues) {
    ObjectStateMatrix plus{2, 2, {1, 1, 1, 1}}, minus{2, 2, {-1, -1, -1, -1}}, half{1, 2, {1, -1}};
    EXPECT_EQ(state_distance(plus, minus), 2.0);
    // half upsampled to 2x2 is {1, 1, -1, -1}.
    EXPECT_EQ(state_distance(plus, half), 1.0);
}
