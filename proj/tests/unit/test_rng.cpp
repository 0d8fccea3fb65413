#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "stowave/parallel.hpp"
#include "stowave/rng.hpp"
#include "stowave/stats.hpp"

using namespace stowave;

// Known-answer vectors of the Random123 reference implementation.
TEST(Philox, KnownAnswerZero) {
    const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
    const auto out = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out[0], 0x408f276du);
    EXPECT_EQ(out[1], 0x41c83b0eu);
    EXPECT_EQ(out[2], 0xa20bc7c6u);
    EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
    const auto out = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out[0], 0xd16cfe09u);
    EXPECT_EQ(out[1], 0x94fdccebu);
    EXPECT_EQ(out[2], 0x5001e420u);
    EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(CounterRng, DistinctCoordinatesGiveDistinctBlocks) {
    const CounterRng a({1, 2, 3, 0}), b({1, 2, 3, 1}), c({1, 3, 3, 0}), d({2, 2, 3, 0});
    EXPECT_NE(a.block(0), b.block(0));
    EXPECT_NE(a.block(0), c.block(0));
    EXPECT_NE(a.block(0), d.block(0));
    EXPECT_NE(a.block(0), a.block(1));
    EXPECT_EQ(a.block(7), CounterRng({1, 2, 3, 0}).block(7));
}

TEST(CounterRng, UniformsInOpenUnitInterval) {
    const CounterRng rng({42, 0, 0, 0});
    for (std::uint32_t i = 0; i < 10000; ++i) {
        const auto u = rng.uniform_pair(i);
        EXPECT_GT(u[0], 0.0);
        EXPECT_LT(u[0], 1.0);
        EXPECT_GT(u[1], 0.0);
        EXPECT_LT(u[1], 1.0);
    }
}

TEST(CounterRng, NormalMoments) {
    const CounterRng rng({7, 0, 0, 0});
    constexpr int n = 200000;
    KahanSum m1, m2, m4;
    for (std::uint32_t i = 0; i < n / 2; ++i) {
        for (double g : rng.normal_pair(i)) {
            m1.add(g);
            m2.add(g * g);
            m4.add(g * g * g * g);
        }
    }
    EXPECT_NEAR(m1.value() / n, 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(m2.value() / n, 1.0, 5.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(m4.value() / n, 3.0, 5.0 * std::sqrt(96.0 / n));
}

TEST(Parallel, VisitsEachIndexOnceAndPropagatesErrors) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(100, 4,
                              [](std::size_t i) {
                                  if (i == 37) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}
