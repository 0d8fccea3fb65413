#ifndef STOWAVE_PROPAGATOR_HPP
#define STOWAVE_PROPAGATOR_HPP

// The wave Green function acts on mode k (frequency w = |k|-scaled) as
// multiplication by sin(w t)/w; over one step the free evolution of
// (u(k), du/dt(k)) is the rotation
//
//     [ c      s ]      c = cos(w dt),  s = sin(w dt)/w.
//     [-w^2 s  c ]
//
// This module also holds the coefficient and initial-data libraries and the
// joint validation of a model configuration.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "noise.hpp"

namespace stowave {

struct WaveMultiplier {
    double c = 1.0;
    double s = 0.0;
};

inline WaveMultiplier wave_multiplier(double dt, double omega) {
    if (dt < 0.0 || omega < 0.0) throw std::invalid_argument("wave_multiplier: negative input");
    if (omega == 0.0) return {1.0, dt};
    return {std::cos(omega * dt), std::sin(omega * dt) / omega};
}

/// Per-mode multipliers of a grid for its time step.
struct ModeMultipliers {
    std::vector<double> c;
    std::vector<double> s;
    std::vector<double> omega_sq;

    explicit ModeMultipliers(const Grid& grid) {
        const std::size_t total = grid.size();
        c.resize(total);
        s.resize(total);
        omega_sq.resize(total);
        for (std::size_t i = 0; i < total; ++i) {
            const auto m = wave_multiplier(grid.dt(), grid.omega(i));
            c[i] = m.c;
            s[i] = m.s;
            omega_sq[i] = grid.omega(i) * grid.omega(i);
        }
    }
};

/// Free evolution of every mode over one step; `backward` runs it with -dt.
inline void free_step(const ModeMultipliers& mm, std::span<cplx> u, std::span<cplx> v, bool backward = false) {
    const double sign = backward ? -1.0 : 1.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double s = sign * mm.s[i];
        const cplx un = mm.c[i] * u[i] + s * v[i];
        const cplx vn = -mm.omega_sq[i] * s * u[i] + mm.c[i] * v[i];
        u[i] = un;
        v[i] = vn;
    }
}

using Params = std::map<std::string, double>;

namespace detail {

inline double param(const Params& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

} // namespace detail

/// Initial displacement nu0 and velocity nu1 from a fixed library.
struct InitialData {
    std::string name;
    std::function<double(const std::array<double, 3>&)> nu0;
    std::function<double(const std::array<double, 3>&)> nu1;
    double gamma1 = 1.0;
    double gamma2 = 1.0;
    /// Support radius around the domain centre; 0 for periodic data.
    double support_radius = 0.0;
};

/// Library members:
///   zero
///   constant   nu0 = c0, nu1 = c1
///   trig       nu0 = amp0 cos(2 pi m x1 / L), nu1 = amp1 cos(2 pi m x1 / L)   (needs L)
///   gaussian   amp * exp(-|x - centre|^2 / (2 width^2)); support radius 6 width
///   poly_bump  amp * (1 - |x - centre|^2 / R^2)^3 inside the ball of radius R (C^2)
/// Bumps are centred at the middle of the box (param "center", default L/2).
inline InitialData make_initial_data(const std::string& name, const Params& params, double length, int dim) {
    using detail::param;
    if (dim != 1 && dim != 3) throw std::invalid_argument("initial data: dimension must be 1 or 3");
    InitialData d;
    d.name = name;
    const double amp0 = param(params, "amp0", 1.0);
    const double amp1 = param(params, "amp1", 0.0);
    const double centre = param(params, "center", length / 2.0);
    auto r2 = [centre, dim](const std::array<double, 3>& x) {
        double s = 0.0;
        for (int a = 0; a < dim; ++a) s += (x[a] - centre) * (x[a] - centre);
        return s;
    };
    if (name == "zero") {
        d.nu0 = [](const auto&) { return 0.0; };
        d.nu1 = [](const auto&) { return 0.0; };
    } else if (name == "constant") {
        const double c0 = param(params, "c0", 1.0), c1 = param(params, "c1", 0.0);
        d.nu0 = [c0](const auto&) { return c0; };
        d.nu1 = [c1](const auto&) { return c1; };
    } else if (name == "trig") {
        const double m = param(params, "mode", 1.0);
        const double k = 2.0 * std::numbers::pi * m / length;
        d.nu0 = [amp0, k](const auto& x) { return amp0 * std::cos(k * x[0]); };
        d.nu1 = [amp1, k](const auto& x) { return amp1 * std::cos(k * x[0]); };
    } else if (name == "gaussian") {
        const double w = param(params, "width", length / 16.0);
        if (!(w > 0.0)) throw HypothesisError("H.3", "gaussian width must be positive");
        auto shape = [w, r2](const std::array<double, 3>& x) { return std::exp(-0.5 * r2(x) / (w * w)); };
        d.nu0 = [amp0, shape](const auto& x) { return amp0 * shape(x); };
        d.nu1 = [amp1, shape](const auto& x) { return amp1 * shape(x); };
        d.support_radius = 6.0 * w;
    } else if (name == "poly_bump") {
        const double rad = param(params, "radius", length / 8.0);
        if (!(rad > 0.0)) throw HypothesisError("H.3", "bump radius must be positive");
        auto shape = [rad, r2](const std::array<double, 3>& x) {
            const double q = 1.0 - r2(x) / (rad * rad);
            return q > 0.0 ? q * q * q : 0.0;
        };
        d.nu0 = [amp0, shape](const auto& x) { return amp0 * shape(x); };
        d.nu1 = [amp1, shape](const auto& x) { return amp1 * shape(x); };
        d.support_radius = rad;
    } else {
        throw std::invalid_argument("unknown initial data '" + name + "'");
    }
    return d;
}

inline std::pair<Field, Field> initial_fields(const InitialData& init, const Grid& grid) {
    std::vector<double> a(grid.size()), b(grid.size());
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const auto x = grid.coordinate(p);
        a[p] = init.nu0(x);
        b[p] = init.nu1(x);
    }
    return {Field(grid, std::move(a)), Field(grid, std::move(b))};
}

/// w(t) = d/dt (G(t) * nu0) + G(t) * nu1, evaluated per mode in closed form.
inline Field homogeneous_solution(const InitialData& init, const Grid& grid, int t_index) {
    if (t_index < 0 || t_index > grid.nt()) throw std::out_of_range("homogeneous_solution: time index out of range");
    const auto [f0, f1] = initial_fields(init, grid);
    const auto a = forward_transform(f0);
    const auto b = forward_transform(f1);
    const double t = t_index * grid.dt();
    Spectrum w(grid.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const auto m = wave_multiplier(t, grid.omega(i));
        w[i] = m.c * a[i] + m.s * b[i];
    }
    return inverse_transform(grid, w);
}

/// sigma, b and (when condition (D) holds) b'.
struct Coefficients {
    std::string name;
    std::function<double(double)> sigma;
    std::function<double(double)> b;
    std::function<double(double)> b_prime;
    double lipschitz = 0.0;       // K
    double lipschitz_prime = 0.0; // K'
    bool sigma_constant = false;
    bool b_affine = false;

    [[nodiscard]] bool has_b_prime() const noexcept { return static_cast<bool>(b_prime); }
};

/// Checks the Lipschitz bounds on 10^3 equispaced points of [-range, range].
/// Adjacent-point slopes bound the global constant for scalar functions.
inline void verify_lipschitz(const Coefficients& c, double range = 10.0) {
    constexpr int points = 1000;
    const double h = 2.0 * range / (points - 1);
    const double slack = 1.0 + 1e-9;
    auto check = [&](const std::function<double(double)>& f, double bound, const char* what, const char* hyp) {
        double prev = f(-range);
        for (int i = 1; i < points; ++i) {
            const double x = -range + i * h;
            const double cur = f(x);
            if (std::abs(cur - prev) > bound * h * slack + 1e-15)
                throw HypothesisError(hyp, std::string(what) + " violates its Lipschitz bound near x = " +
                                               std::to_string(x));
            prev = cur;
        }
    };
    check(c.sigma, c.lipschitz, "sigma", "H.1");
    check(c.b, c.lipschitz, "b", "H.1");
    if (c.has_b_prime()) {
        check(c.b_prime, c.lipschitz_prime, "b'", "(D)");
        for (int i = 0; i < points; ++i) {
            const double x = -range + i * h;
            if (std::abs(c.b_prime(x)) > c.lipschitz * slack)
                throw HypothesisError("(D)", "|b'| exceeds K near x = " + std::to_string(x));
        }
    }
}

/// Library members:
///   constant_sigma_affine_b   sigma = sigma0, b = beta0 + beta1 u
///   trig                      sigma = sigma0 cos u, b = beta0 sin u
///   saturating                sigma = sigma0 u / sqrt(1+u^2), b = beta0 u / sqrt(1+u^2)
inline Coefficients make_coeffs(const std::string& name, const Params& params) {
    using detail::param;
    Coefficients c;
    c.name = name;
    const double s0 = param(params, "sigma0", 1.0);
    const double b0 = param(params, "beta0", 0.0);
    if (name == "constant_sigma_affine_b") {
        const double b1 = param(params, "beta1", 0.0);
        c.sigma = [s0](double) { return s0; };
        c.b = [b0, b1](double u) { return b0 + b1 * u; };
        c.b_prime = [b1](double) { return b1; };
        c.lipschitz = std::abs(b1);
        c.lipschitz_prime = 0.0;
        c.sigma_constant = true;
        c.b_affine = true;
    } else if (name == "trig") {
        c.sigma = [s0](double u) { return s0 * std::cos(u); };
        c.b = [b0](double u) { return b0 * std::sin(u); };
        c.b_prime = [b0](double u) { return b0 * std::cos(u); };
        c.lipschitz = std::max(std::abs(s0), std::abs(b0));
        c.lipschitz_prime = std::abs(b0);
        c.sigma_constant = s0 == 0.0;
        c.b_affine = b0 == 0.0;
    } else if (name == "saturating") {
        c.sigma = [s0](double u) { return s0 * u / std::sqrt(1.0 + u * u); };
        c.b = [b0](double u) { return b0 * u / std::sqrt(1.0 + u * u); };
        c.b_prime = [b0](double u) { return b0 / std::pow(1.0 + u * u, 1.5); };
        c.lipschitz = std::max(std::abs(s0), std::abs(b0));
        // max |d^2/du^2 (u/sqrt(1+u^2))| = 3 (1/2) (5/4)^{-5/2}, attained at u = 1/2
        c.lipschitz_prime = std::abs(b0) * 1.5 * std::pow(1.25, -2.5);
        c.sigma_constant = s0 == 0.0;
        c.b_affine = b0 == 0.0;
    } else {
        throw std::invalid_argument("unknown coefficients '" + name + "'");
    }
    verify_lipschitz(c);
    return c;
}

/// h(eps) = eps^{-theta} with theta in (0, 1/2).
struct DeviationScale {
    double theta = 0.25;

    void validate() const {
        if (!(theta > 0.0 && theta < 0.5))
            throw HypothesisError("deviation scale",
                                  "theta = " + std::to_string(theta) +
                                      " must lie in (0, 1/2) so that h(eps) -> inf and sqrt(eps) h(eps) -> 0");
    }
    [[nodiscard]] double h(double eps) const { return std::pow(eps, -theta); }
};

/// A validated model: everything the solvers need, immutable and shareable.
struct Model {
    Grid grid;
    CovarianceSpec covariance;
    SpectralMeasure measure;
    Coefficients coeffs;
    InitialData init;
    DeviationScale scale;
    ModeMultipliers multipliers;
    std::vector<std::string> warnings;
};

/// Joint check of the grid, H.1-H.3, condition (D), the deviation scale and the
/// domain size L >= 2 (T + r0). `deviation_experiment` requests a warning when
/// b' is absent.
inline Model validate_config(const Grid& grid, const CovarianceSpec& spec, const Coefficients& coeffs,
                             const InitialData& init, const DeviationScale& scale,
                             bool deviation_experiment = false) {
    spec.validate();
    if (spec.dim != grid.dim()) throw HypothesisError("H.2", "covariance dimension differs from grid dimension");
    if (!coeffs.sigma || !coeffs.b) throw HypothesisError("H.1", "coefficients are incomplete");
    verify_lipschitz(coeffs);
    if (!init.nu0 || !init.nu1) throw HypothesisError("H.3", "initial data are incomplete");
    const auto [f0, f1] = initial_fields(init, grid);
    (void)f0;
    (void)f1; // Field construction rejects non-finite values
    if (init.gamma1 <= 0.0 || init.gamma1 > 1.0 || init.gamma2 <= 0.0 || init.gamma2 > 1.0)
        throw HypothesisError("H.3", "Hoelder degrees must lie in (0, 1]");
    scale.validate();
    const double needed = 2.0 * (grid.horizon() + init.support_radius);
    if (grid.length() < needed * (1.0 - 1e-12))
        throw HypothesisError("domain", "L = " + std::to_string(grid.length()) + " is below 2(T + r0) = " +
                                            std::to_string(needed));
    std::vector<std::string> warnings;
    if (deviation_experiment && !coeffs.has_b_prime())
        warnings.emplace_back("condition (D) does not hold: b' is unavailable for CLT/MDP experiments");
    return Model{grid, spec, spectral_density(spec, grid), coeffs, init, scale, ModeMultipliers(grid), warnings};
}

} // namespace stowave

#endif
