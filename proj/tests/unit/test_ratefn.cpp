#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "stowave/ratefn.hpp"

using namespace stowave;

namespace {

Model gaussian_model(double beta1 = 0.0, int n = 32, int nt = 50, double dt = 0.02) {
    const Grid g(1, n, 4.0, dt, nt);
    return validate_config(g, {0.5, 1.0, {}, 1},
                           make_coeffs("constant_sigma_affine_b", {{"sigma0", 1.0}, {"beta0", 0.0}, {"beta1", beta1}}),
                           make_initial_data("zero", {}, 4.0, 1), {0.25});
}

Model trig_model() {
    const Grid g(1, 16, 4.0, 0.02, 30);
    return validate_config(g, {0.5, 1.0, {}, 1}, make_coeffs("trig", {{"sigma0", 1.0}, {"beta0", 1.0}}),
                           make_initial_data("trig", {{"mode", 1.0}, {"amp0", 1.0}, {"amp1", 0.5}}, 4.0, 1), {0.25});
}

Field random_field(const Grid& g, unsigned seed, bool zero_mean) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(g.size());
    double mean = 0.0;
    for (auto& x : v) {
        x = nd(gen);
        mean += x / g.size();
    }
    if (zero_mean)
        for (auto& x : v) x -= mean;
    return Field(g, v);
}

} // namespace

TEST(RateFunction, ZeroTarget) {
    const auto m = gaussian_model();
    const auto u0 = solve_deterministic(m);
    const auto r = rate_function(m, u0, TargetSpec::point(25, 7, 0.0));
    EXPECT_EQ(r.value, 0.0);
    EXPECT_TRUE(r.minimizer.is_zero());
    EXPECT_TRUE(r.feasible);
}

TEST(RateFunction, PointConstraintMatchesGaussianOracle) {
    for (double beta1 : {0.0, 0.8, -1.5}) {
        const auto m = gaussian_model(beta1);
        const auto u0 = solve_deterministic(m);
        const auto r = rate_function(m, u0, TargetSpec::point(25, 7, 0.6));
        ASSERT_TRUE(r.feasible);
        EXPECT_LT(r.residual, 1e-8);
        const double oracle = gaussian_point_rate(m, 25, 7, 0.6);
        EXPECT_NEAR(r.value / oracle, 1.0, 1e-3) << "beta1 " << beta1;
        EXPECT_NEAR(r.value / oracle, 1.0, 1e-9) << "beta1 " << beta1; // exact in exact arithmetic
    }
}

TEST(RateFunction, QuadraticHomogeneity) {
    const auto m = trig_model();
    const auto u0 = solve_deterministic(m);
    const auto g = random_field(m.grid, 3, false);
    for (const auto& t : {TargetSpec::point(20, 3, 0.4), TargetSpec::terminal_field(g)}) {
        const auto r1 = rate_function(m, u0, t);
        const auto r2 = rate_function(m, u0, t.scaled(2.0));
        ASSERT_TRUE(r1.feasible) << r1.note;
        ASSERT_TRUE(r2.feasible) << r2.note;
        EXPECT_NEAR(r2.value / r1.value, 4.0, 4e-8);
        EXPECT_LT(ht_norm(r2.minimizer.axpy(-1.0, r1.minimizer.scaled(2.0)), m.measure),
                  1e-6 * ht_norm(r2.minimizer, m.measure));
    }
}

TEST(RateFunction, RecoversNormOfControlsInRangeOfAdjoint) {
    const auto m = trig_model();
    const auto u0 = solve_deterministic(m);
    FieldPath w(m.grid);
    w.frame(m.grid.nt()) = random_field(m.grid, 5, false);
    const auto h = apply_A_adjoint(m, u0, w);
    const auto z = apply_A(m, u0, h);
    const auto r = rate_function(m, u0, TargetSpec::terminal_field(z.frame(m.grid.nt())));
    ASSERT_TRUE(r.feasible) << r.note;
    EXPECT_NEAR(r.value / (0.5 * ht_norm_sq(h, m.measure)), 1.0, 1e-6);
}

TEST(RateFunction, EnlargingConstraintsNeverDecreasesRate) {
    const auto m = trig_model();
    const auto u0 = solve_deterministic(m);
    const auto g = random_field(m.grid, 8, false);
    const auto terminal = rate_function(m, u0, TargetSpec::terminal_field(g));
    const auto point = rate_function(m, u0, TargetSpec::point(m.grid.nt(), 4, g[4]));
    ASSERT_TRUE(terminal.feasible);
    EXPECT_LE(point.value, terminal.value * (1 + 1e-8));
}

TEST(RateFunction, UnreachableTargetsAreFlagged) {
    const auto m = gaussian_model(0.0, 16, 20, 0.02);
    const auto u0 = solve_deterministic(m);
    const auto full = rate_function(m, u0, TargetSpec::full_path(FieldPath(m.grid)));
    EXPECT_FALSE(full.feasible);
    EXPECT_TRUE(std::isinf(full.value));
    // Constant sigma never reaches the spatial mean (mu(0) = 0).
    const Field mean(m.grid, std::vector<double>(m.grid.size(), 1.0));
    const auto r = rate_function(m, u0, TargetSpec::terminal_field(mean));
    EXPECT_FALSE(r.feasible);
    EXPECT_TRUE(std::isinf(r.value));
    EXPECT_THROW(rate_function(m, u0, TargetSpec::point(0, 1, 1.0)), std::out_of_range);
}

TEST(GaussianPointRate, ScalingAndDirectSum) {
    const Grid g(1, 32, 4.0, 0.02, 50);
    const auto m = gaussian_model(0.0, 32, 50, 0.02);
    EXPECT_EQ(gaussian_point_rate(m, 25, 3, 0.0), 0.0);
    const double r1 = gaussian_point_rate(m, 25, 3, 0.7);
    EXPECT_NEAR(gaussian_point_rate(m, 25, 3, 1.4) / r1, 4.0, 1e-14);
    // t* = 0.5: s^2 = dt sum_k mu(k) sum_{j<25} (sin(w (t* - t_j)) / w)^2
    double s2 = 0.0;
    for (std::size_t k = 1; k < g.size(); ++k) {
        const double om = g.omega(k);
        for (int j = 0; j < 25; ++j) {
            const double s = std::sin(om * (0.5 - j * 0.02)) / om;
            s2 += 0.02 * m.measure[k] * s * s;
        }
    }
    EXPECT_NEAR(gaussian_point_variance(m, 25) / s2, 1.0, 1e-12);
    EXPECT_NEAR(r1, 0.49 / (2 * s2), 1e-12 * r1);
    EXPECT_THROW(gaussian_point_rate(trig_model(), 10, 1, 1.0), std::invalid_argument);
}

TEST(LdpForwardBound, ZeroAndScaling) {
    const auto m = trig_model();
    const auto fb0 = ldp_forward_bound(m, Control(m.grid));
    EXPECT_EQ(fb0.bound, 0.0);
    EXPECT_EQ(sup_distance(fb0.path, solve_deterministic(m)), 0.0);
    FieldPath w(m.grid);
    w.frame(10) = random_field(m.grid, 1, false);
    const auto h = apply_A_adjoint(m, solve_deterministic(m), w);
    EXPECT_NEAR(ldp_forward_bound(m, h.scaled(3.0)).bound / ldp_forward_bound(m, h).bound, 9.0, 1e-12);
}

TEST(LdpForwardBound, LeastNormRecoveryInLinearCase) {
    const auto m = gaussian_model(0.0, 16, 30, 0.02);
    const auto u0 = solve_deterministic(m);
    FieldPath w(m.grid);
    w.frame(m.grid.nt()) = random_field(m.grid, 11, true);
    const auto h = apply_A_adjoint(m, u0, w);
    const auto fb = ldp_forward_bound(m, h);
    const auto target = path_difference(fb.path, u0);
    const auto r = rate_function(m, u0, TargetSpec::terminal_field(target.frame(m.grid.nt())));
    ASSERT_TRUE(r.feasible);
    EXPECT_LE(r.value, fb.bound * (1 + 1e-6));
    EXPECT_NEAR(r.value / fb.bound, 1.0, 1e-6);
}
