#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "stowave/solver.hpp"

using namespace stowave;

namespace {

Model make_model(const Grid& g, const Coefficients& c, const InitialData& init, double beta = 0.5,
                 double theta = 0.25) {
    return validate_config(g, {beta, 1.0, {}, g.dim()}, c, init, DeviationScale{theta});
}

Coefficients affine(double sigma0, double beta0, double beta1) {
    return make_coeffs("constant_sigma_affine_b", {{"sigma0", sigma0}, {"beta0", beta0}, {"beta1", beta1}});
}

InitialData trig_data(double length) {
    return make_initial_data("trig", {{"mode", 1.0}, {"amp0", 1.0}, {"amp1", 0.5}}, length, 1);
}

Control random_control(const Model& m, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    std::vector<Field> f;
    for (int j = 0; j < m.grid.nt(); ++j) {
        std::vector<double> v(m.grid.size());
        for (auto& x : v) x = nd(gen);
        f.emplace_back(m.grid, v);
    }
    return Control::from_fields(m.measure, f);
}

FieldPath random_path(const Grid& g, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    std::vector<Field> f;
    for (int j = 0; j <= g.nt(); ++j) {
        std::vector<double> v(g.size());
        for (auto& x : v) x = nd(gen);
        f.emplace_back(g, v);
    }
    return FieldPath(g, f);
}

bool bitwise_equal(const FieldPath& a, const FieldPath& b) {
    for (std::size_t j = 0; j < a.frame_count(); ++j)
        for (std::size_t x = 0; x < a.grid().size(); ++x)
            if (a.frame(j)[x] != b.frame(j)[x]) return false;
    return true;
}

double path_dot(const FieldPath& a, const FieldPath& b) {
    KahanSum acc;
    for (std::size_t j = 0; j < a.frame_count(); ++j)
        for (std::size_t x = 0; x < a.grid().size(); ++x) acc.add(a.frame(j)[x] * b.frame(j)[x]);
    return acc.value();
}

} // namespace

TEST(Deterministic, FreeEvolutionEqualsHomogeneousSolution) {
    const Grid g(1, 32, 4.0, 0.02, 50);
    const auto m = make_model(g, affine(1.0, 0.0, 0.0), trig_data(4.0));
    const auto u0 = solve_deterministic(m);
    for (int t = 0; t <= g.nt(); ++t) {
        const auto w = homogeneous_solution(m.init, g, t);
        for (std::size_t x = 0; x < g.size(); ++x) EXPECT_NEAR(u0.frame(t)[x], w[x], 1e-12);
    }
}

TEST(Deterministic, ConstantDriftGivesHalfCTSquared) {
    const Grid g(1, 16, 4.0, 0.01, 100);
    const auto m = make_model(g, affine(1.0, 0.7, 0.0), make_initial_data("zero", {}, 4.0, 1));
    const auto u0 = solve_deterministic(m);
    for (int t : {1, 10, 100}) {
        const double tt = t * g.dt();
        for (std::size_t x = 0; x < g.size(); ++x) EXPECT_NEAR(u0.frame(t)[x], 0.7 * tt * tt / 2, 1e-12);
    }
}

TEST(Deterministic, LinearDriftMatchesCosh) {
    const double lambda = 1.5, c0 = 0.8;
    const Grid g(1, 16, 4.0, 1e-3, 1000);
    const auto m = make_model(g, affine(1.0, 0.0, lambda), make_initial_data("constant", {{"c0", c0}}, 4.0, 1));
    const auto u0 = solve_deterministic(m);
    for (int t : {250, 500, 1000})
        EXPECT_NEAR(u0.frame(t)[3], c0 * std::cosh(std::sqrt(lambda) * t * g.dt()), 1e-4);
}

TEST(Deterministic, SecondOrderInTime) {
    std::vector<Field> finals;
    for (int level = 0; level < 3; ++level) {
        const int nt = 25 << level;
        const Grid g(1, 32, 4.0, 1.0 / nt, nt);
        const auto m = make_model(g, make_coeffs("trig", {{"sigma0", 1.0}, {"beta0", 2.0}}), trig_data(4.0));
        finals.push_back(solve_deterministic(m).frame(nt));
    }
    double d1 = 0.0, d2 = 0.0;
    for (std::size_t x = 0; x < finals[0].size(); ++x) {
        d1 = std::max(d1, std::abs(finals[0][x] - finals[1][x]));
        d2 = std::max(d2, std::abs(finals[1][x] - finals[2][x]));
    }
    EXPECT_GE(std::log2(d1 / d2), 1.8);
}

TEST(Deterministic, BlowUpReportsStep) {
    const Grid g(1, 8, 4.0, 0.01, 100);
    const auto m = make_model(g, affine(1.0, 0.0, 1.0e9), make_initial_data("constant", {{"c0", 1.0}}, 4.0, 1));
    try {
        solve_deterministic(m);
        FAIL();
    } catch (const BlowUpError& e) {
        EXPECT_GT(e.step(), 0u);
        EXPECT_LE(e.step(), 100u);
    }
}

TEST(Deterministic, MildResidualIsSmall) {
    const Grid g(1, 16, 4.0, 0.02, 50);
    const auto m = make_model(g, make_coeffs("trig", {{"sigma0", 1.0}, {"beta0", 1.0}}), trig_data(4.0));
    const auto u0 = solve_deterministic(m);
    EXPECT_LT(mild_residual(m, u0), 1e-10);
    std::ostringstream os;
    write_trace_csv(os, u0);
    std::istringstream in(os.str());
    std::string line;
    int rows = 0;
    std::getline(in, line);
    EXPECT_EQ(line, "step,t,sup_abs");
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, g.nt() + 1);
}

TEST(Spde, DegenerateCasesAreBitwiseDeterministic) {
    const Grid g(1, 32, 4.0, 0.02, 50);
    const auto noisy = make_model(g, make_coeffs("trig", {{"sigma0", 1.0}, {"beta0", 1.0}}), trig_data(4.0));
    const auto quiet = make_model(g, make_coeffs("trig", {{"sigma0", 0.0}, {"beta0", 1.0}}), trig_data(4.0));
    const auto noise = NoisePath::generated(3, 0);
    EXPECT_TRUE(bitwise_equal(solve_spde(noisy, 0.0, noise), solve_deterministic(noisy)));
    EXPECT_TRUE(bitwise_equal(solve_spde(quiet, 0.1, noise), solve_deterministic(quiet)));
    const auto ue = solve_spde(noisy, 0.1, noise);
    const auto [nu0, nu1] = initial_fields(noisy.init, g);
    for (std::size_t x = 0; x < g.size(); ++x) EXPECT_EQ(ue.frame(0)[x], nu0[x]);
    EXPECT_FALSE(bitwise_equal(ue, solve_deterministic(noisy)));
    EXPECT_THROW(solve_spde(noisy, -1.0, noise), std::invalid_argument);
}

TEST(Spde, ExplicitIncrementsReproduceGeneratedPath) {
    const Grid g(1, 16, 4.0, 0.02, 20);
    const auto m = make_model(g, make_coeffs("trig", {{"sigma0", 1.0}, {"beta0", 1.0}}), trig_data(4.0));
    const auto gen = NoisePath::generated(8, 5);
    std::vector<Field> inc;
    for (int j = 0; j < g.nt(); ++j) inc.push_back(sample_noise_increment(m.measure, g.dt(), gen.coords(j)).field);
    EXPECT_TRUE(bitwise_equal(solve_spde(m, 0.3, gen), solve_spde(m, 0.3, NoisePath::from_increments(inc))));
}

TEST(Spde, VarianceAccumulation) {
    const double eps = 0.5;
    const Grid g(1, 16, 4.0, 0.02, 40);
    const auto m = make_model(g, affine(1.0, 0.0, 0.0), make_initial_data("zero", {}, 4.0, 1));
    constexpr int n = 2000;
    const int t = g.nt();
    std::vector<double> acc(g.size(), 0.0);
    for (int s = 0; s < n; ++s) {
        const auto c = forward_transform(solve_spde(m, eps, NoisePath::generated(17, s)).frame(t));
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += std::norm(c[i]) / n;
    }
    for (std::size_t i = 1; i < g.size(); ++i) {
        double quad = 0.0;
        for (int j = 0; j < t; ++j) {
            const double sj = wave_multiplier((t - j) * g.dt(), g.omega(i)).s;
            quad += g.dt() * sj * sj;
        }
        EXPECT_NEAR(acc[i] / (eps * m.measure[i] * quad), 1.0, 0.10) << "mode " << i;
    }
}

TEST(FirstOrder, ZeroNoiseLinearityAndMissingDerivative) {
    const Grid g(1, 16, 4.0, 0.02, 20);
    const auto m = make_model(g, make_coeffs("trig", {{"sigma0", 1.0}, {"beta0", 1.0}}), trig_data(4.0));
    const auto u0 = solve_deterministic(m);
    EXPECT_EQ(sup_norm(solve_first_order(m, u0, NoisePath::zero())), 0.0);

    std::vector<Field> a, b, comb;
    for (int j = 0; j < g.nt(); ++j) {
        a.push_back(sample_noise_increment(m.measure, g.dt(), {1, 0, std::uint32_t(j), 0}).field);
        b.push_back(sample_noise_increment(m.measure, g.dt(), {1, 1, std::uint32_t(j), 0}).field);
        std::vector<double> v(g.size());
        for (std::size_t x = 0; x < g.size(); ++x) v[x] = 2.5 * a.back()[x] + b.back()[x];
        comb.emplace_back(g, v);
    }
    const auto ya = solve_first_order(m, u0, NoisePath::from_increments(a));
    const auto yb = solve_first_order(m, u0, NoisePath::from_increments(b));
    const auto yc = solve_first_order(m, u0, NoisePath::from_increments(comb));
    for (std::size_t j = 0; j < yc.frame_count(); ++j)
        for (std::size_t x = 0; x < g.size(); ++x)
            EXPECT_NEAR(yc.frame(j)[x], 2.5 * ya.frame(j)[x] + yb.frame(j)[x], 1e-12);

    auto no_d = m;
    no_d.coeffs.b_prime = nullptr;
    EXPECT_THROW(solve_first_order(no_d, u0, NoisePath::zero()), HypothesisError);
}

TEST(FirstOrder, CoupledExactnessForAffineCoefficients) {
    const Grid g(1, 32, 4.0, 0.02, 50);
    const auto m = make_model(g, affine(0.8, 0.3, -0.6), trig_data(4.0));
    const auto u0 = solve_deterministic(m);
    for (std::uint64_t s = 0; s < 3; ++s) {
        const auto noise = NoisePath::generated(21, s);
        const auto y = solve_first_order(m, u0, noise);
        for (double eps : {1e-2, 1e-4, 1e-6}) {
            const auto ye = path_difference(solve_spde(m, eps, noise), u0, 1.0 / std::sqrt(eps));
            EXPECT_LT(sup_distance(ye, y), 1e-10);
        }
    }
}

TEST(FirstOrder, VarianceMatchesAccumulation) {
    const Grid g(1, 16, 4.0, 0.02, 40);
    const auto m = make_model(g, affine(1.0, 0.0, 0.0), make_initial_data("zero", {}, 4.0, 1));
    const auto u0 = solve_deterministic(m);
    constexpr int n = 2000;
    const std::size_t probe = 5;
    KahanSum acc;
    for (int s = 0; s < n; ++s) {
        const double v = solve_first_order(m, u0, NoisePath::generated(4, s)).frame(g.nt())[probe];
        acc.add(v * v);
    }
    double quad = 0.0;
    for (std::size_t i = 1; i < g.size(); ++i)
        for (int j = 0; j < g.nt(); ++j) {
            const double sj = wave_multiplier((g.nt() - j) * g.dt(), g.omega(i)).s;
            quad += m.measure[i] * g.dt() * sj * sj;
        }
    EXPECT_NEAR(acc.value() / n / quad, 1.0, 0.10);
    const auto q = q_epsilon(solve_first_order(m, u0, NoisePath::generated(4, 0)), m.scale, 1e-4);
    EXPECT_NEAR(q.frame(g.nt())[probe], solve_first_order(m, u0, NoisePath::generated(4, 0)).frame(g.nt())[probe] / 10.0,
                1e-15);
}

TEST(Skeleton, DegenerateControls) {
    const Grid g(1, 16, 4.0, 0.02, 20);
    const auto m = make_model(g, make_coeffs("trig", {{"sigma0", 1.0}, {"beta0", 1.0}}), trig_data(4.0));
    const auto quiet = make_model(g, make_coeffs("trig", {{"sigma0", 0.0}, {"beta0", 1.0}}), trig_data(4.0));
    EXPECT_TRUE(bitwise_equal(solve_skeleton(m, Control(g)), solve_deterministic(m)));
    EXPECT_TRUE(bitwise_equal(solve_skeleton(quiet, random_control(quiet, 2)), solve_deterministic(quiet)));
}

TEST(Skeleton, SingleModeConstantControlQuadrature) {
    const Grid g(1, 16, 4.0, 0.01, 100);
    const auto m = make_model(g, affine(1.0, 0.0, 0.0), trig_data(4.0));
    std::vector<double> v(g.size());
    for (std::size_t x = 0; x < g.size(); ++x) v[x] = std::cos(2 * std::numbers::pi * 2 * g.coordinate(x)[0] / 4.0);
    const auto h = Control::constant(m.measure, Field(g, v));
    const auto vh = solve_skeleton(m, h);
    const std::size_t k = 2;
    const cplx hk = h.slot(0)[k];
    for (int t : {10, 50, 100}) {
        const auto diff = forward_transform(vh.frame(t));
        const auto w = forward_transform(homogeneous_solution(m.init, g, t));
        double riemann = 0.0;
        for (int j = 0; j < t; ++j) riemann += g.dt() * wave_multiplier((t - j) * g.dt(), g.omega(k)).s;
        const double om = g.omega(k), tt = t * g.dt();
        const double exact = (1.0 - std::cos(om * tt)) / (om * om);
        EXPECT_NEAR(std::abs(diff[k] - w[k] - riemann * m.measure[k] * hk), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(diff[k] - w[k] - exact * m.measure[k] * hk), 0.0, 2.0 * g.dt() * m.measure[k] * std::abs(hk));
        for (std::size_t i = 0; i < g.size(); ++i)
            if (i != k && i != g.conjugate(k)) {
                EXPECT_LT(std::abs(diff[i] - w[i]), 1e-13);
            }
    }
}

TEST(LinearSkeleton, LinearityAndZero) {
    const Grid g(1, 16, 4.0, 0.02, 20);
    const auto m = make_model(g, make_coeffs("trig", {{"sigma0", 1.0}, {"beta0", 1.5}}), trig_data(4.0));
    const auto u0 = solve_deterministic(m);
    EXPECT_EQ(sup_norm(apply_A(m, u0, Control(g))), 0.0);
    const auto h1 = random_control(m, 1), h2 = random_control(m, 2);
    const auto z1 = apply_A(m, u0, h1), z2 = apply_A(m, u0, h2);
    const auto z2h = apply_A(m, u0, h1.scaled(2.0));
    const auto zc = apply_A(m, u0, h1.axpy(-1.7, h2));
    for (std::size_t j = 0; j < z1.frame_count(); ++j)
        for (std::size_t x = 0; x < g.size(); ++x) {
            EXPECT_NEAR(z2h.frame(j)[x], 2.0 * z1.frame(j)[x], 1e-10);
            EXPECT_NEAR(zc.frame(j)[x], -1.7 * z1.frame(j)[x] + z2.frame(j)[x], 1e-10);
        }
}

TEST(LinearSkeleton, AdjointIdentity) {
    for (int dim : {1, 3}) {
        const Grid g = dim == 1 ? Grid(1, 16, 4.0, 0.02, 20) : Grid(3, 8, 4.0, 0.05, 10);
        const auto init = make_initial_data(dim == 1 ? "trig" : "gaussian",
                                            {{"mode", 1.0}, {"width", 0.25}, {"amp0", 1.0}, {"amp1", 0.5}}, 4.0, dim);
        const auto m = validate_config(g, {dim == 1 ? 0.5 : 1.0, 1.0, {}, dim},
                                       make_coeffs("saturating", {{"sigma0", 1.0}, {"beta0", 1.2}}), init, {0.25});
        const auto u0 = solve_deterministic(m);
        for (unsigned r = 0; r < 20; ++r) {
            const auto h = random_control(m, 100 + r);
            const auto w = random_path(g, 200 + r);
            const double lhs = path_dot(apply_A(m, u0, h), w);
            const double rhs = ht_inner(h, apply_A_adjoint(m, u0, w), m.measure);
            EXPECT_LT(std::abs(lhs - rhs), 1e-8 * std::abs(lhs)) << "dim " << dim << " pair " << r;
        }
        EXPECT_TRUE(apply_A_adjoint(m, u0, FieldPath(g)).is_zero());
    }
}

TEST(LinearSkeleton, AdjointHandRolledWithoutDriftDerivative) {
    // b' = 0: A* w in slot j is N sigma0 sum_{m > j} sin(w (t_m - t_j)) / w * w_m(k).
    const Grid g(1, 8, 4.0, 0.1, 4);
    const double sigma0 = 1.3;
    const auto m = make_model(g, affine(sigma0, 0.4, 0.0), make_initial_data("zero", {}, 4.0, 1));
    const auto u0 = solve_deterministic(m);
    const auto w = random_path(g, 9);
    const auto adj = apply_A_adjoint(m, u0, w);
    for (int j = 0; j < g.nt(); ++j)
        for (std::size_t k = 0; k < g.size(); ++k) {
            cplx expect = 0.0;
            if (m.measure[k] > 0.0)
                for (int mm = j + 1; mm <= g.nt(); ++mm)
                    expect += double(g.size()) * sigma0 * wave_multiplier((mm - j) * g.dt(), g.omega(k)).s *
                              forward_transform(w.frame(mm))[k];
            EXPECT_LT(std::abs(adj.slot(j)[k] - expect), 1e-12);
        }
}

TEST(Controlled, ZeroControlReproducesRescaledDeviation) {
    const Grid g(1, 32, 4.0, 0.02, 50);
    const auto m = make_model(g, make_coeffs("trig", {{"sigma0", 1.0}, {"beta0", 1.0}}), trig_data(4.0));
    const auto u0 = solve_deterministic(m);
    for (double eps : {1e-2, 1e-4}) {
        const auto noise = NoisePath::generated(12, 3);
        const double a = std::sqrt(eps) * m.scale.h(eps);
        const auto ze = path_difference(solve_spde(m, eps, noise), u0, 1.0 / a);
        EXPECT_LT(sup_distance(solve_controlled(m, u0, eps, Control(g), noise), ze), 1e-9);
    }
}

TEST(Controlled, VanishesWithoutNoiseCoefficient) {
    const Grid g(1, 16, 4.0, 0.02, 20);
    const auto m = make_model(g, affine(0.0, 0.5, 0.7), trig_data(4.0));
    const auto u0 = solve_deterministic(m);
    EXPECT_EQ(sup_norm(solve_controlled(m, u0, 1e-3, random_control(m, 5), NoisePath::generated(1, 1))), 0.0);
}

TEST(Controlled, ApproachesLinearSkeleton) {
    const Grid g(1, 32, 4.0, 0.02, 50);
    const auto m = make_model(g, make_coeffs("trig", {{"sigma0", 1.0}, {"beta0", 1.0}}), trig_data(4.0));
    const auto u0 = solve_deterministic(m);
    const auto v = random_control(m, 7).scaled(0.05);
    const auto zv = apply_A(m, u0, v);
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        const double d = sup_distance(solve_controlled(m, u0, eps, v, NoisePath::generated(2, 0)), zv);
        EXPECT_LT(d, prev) << "eps " << eps;
        prev = d;
    }
}

TEST(Spde, SecondMomentsBoundedInEps) {
    const Grid g(1, 16, 4.0, 0.02, 25);
    const auto m = make_model(g, make_coeffs("trig", {{"sigma0", 1.0}, {"beta0", 1.0}}), trig_data(4.0));
    std::vector<double> moments;
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
        KahanSum acc;
        for (int s = 0; s < 200; ++s) {
            const double v = solve_spde(m, eps, NoisePath::generated(6, s)).frame(g.nt())[4];
            acc.add(v * v);
        }
        moments.push_back(acc.value() / 200);
    }
    const double top = *std::max_element(moments.begin(), moments.end());
    const double bottom = *std::min_element(moments.begin(), moments.end());
    EXPECT_LT(top, 2.0 * bottom + 1.0);
}
