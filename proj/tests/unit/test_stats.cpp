#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "stowave/stats.hpp"

using namespace stowave;

TEST(KahanSum, RecoversCancelledTerms) {
    KahanSum acc;
    acc.add(1e16);
    for (int i = 0; i < 1000; ++i) acc.add(1.0);
    acc.add(-1e16);
    EXPECT_EQ(acc.value(), 1000.0);
}

TEST(Jackknife, MeanAndStandardErrorOfKnownSample) {
    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    const auto est = jackknife_mean(xs);
    EXPECT_DOUBLE_EQ(est.mean, 2.5);
    // sample sd = sqrt(5/3), se = sd / 2
    EXPECT_NEAR(est.std_error, std::sqrt(5.0 / 3.0) / 2.0, 1e-14);
    EXPECT_THROW(jackknife_mean(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Ols, ExactLine) {
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0}, y{1.0, 3.0, 5.0, 7.0};
    const auto fit = ols(x, y);
    EXPECT_NEAR(fit.slope, 2.0, 1e-14);
    EXPECT_NEAR(fit.intercept, 1.0, 1e-14);
    EXPECT_NEAR(fit.slope_std_error, 0.0, 1e-14);
    EXPECT_NEAR(fit.r_squared, 1.0, 1e-14);
}

TEST(Normal, TailAndInverse) {
    EXPECT_NEAR(normal_sf(0.0), 0.5, 1e-15);
    EXPECT_NEAR(normal_sf(1.959963984540054), 0.025, 1e-12);
    EXPECT_NEAR(normal_isf(0.025), 1.959963984540054, 1e-10);
}
