#ifndef STOWAVE_RATEFN_HPP
#define STOWAVE_RATEFN_HPP

// Rate function of the linear skeleton map A: h -> Z^h,
//
//     I(g) = inf { 1/2 ||h||^2_{H_T} : O(A h) = g },
//
// for an observation operator O (a point value, the terminal field, or the
// whole path). The least-norm control is h* = A* O* y with y solving
// O A A* O* y = g by conjugate gradients (CGNE in control space).

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cg.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "noise.hpp"
#include "propagator.hpp"
#include "solver.hpp"

namespace stowave {

struct TargetSpec {
    enum class Kind { point_constraint, terminal_field, full_path };
    Kind kind = Kind::point_constraint;
    int t_index = 0;
    std::size_t x_index = 0;
    double value = 0.0;
    std::optional<Field> terminal;
    std::optional<FieldPath> path;

    static TargetSpec point(int t_index, std::size_t x_index, double r) {
        if (!std::isfinite(r)) throw std::invalid_argument("target: point value must be finite");
        TargetSpec t;
        t.kind = Kind::point_constraint;
        t.t_index = t_index;
        t.x_index = x_index;
        t.value = r;
        return t;
    }
    static TargetSpec terminal_field(Field g) {
        TargetSpec t;
        t.kind = Kind::terminal_field;
        t.terminal = std::move(g);
        return t;
    }
    /// Frames 1..nt are constrained; frame 0 of every Z^h is zero.
    static TargetSpec full_path(FieldPath g) {
        TargetSpec t;
        t.kind = Kind::full_path;
        t.path = std::move(g);
        return t;
    }

    /// Same target scaled by c.
    [[nodiscard]] TargetSpec scaled(double c) const {
        TargetSpec t = *this;
        t.value *= c;
        if (t.terminal)
            for (auto& v : t.terminal->values()) v *= c;
        if (t.path)
            for (std::size_t j = 0; j < t.path->frame_count(); ++j)
                for (auto& v : t.path->frame(j).values()) v *= c;
        return t;
    }
};

struct RateResult {
    double value = 0.0;
    Control minimizer;
    /// ||O(A h*) - g|| / ||g|| (0 for g = 0).
    double residual = 0.0;
    unsigned iterations = 0;
    bool feasible = true;
    std::string note;
};

namespace detail {

class Observation {
public:
    Observation(const Grid& grid, const TargetSpec& target) : grid_(grid), target_(target) {
        switch (target.kind) {
        case TargetSpec::Kind::point_constraint:
            if (target.t_index < 1 || target.t_index > grid.nt() || target.x_index >= grid.size())
                throw std::out_of_range("target: probe outside the grid (t_index must be in 1..nt)");
            break;
        case TargetSpec::Kind::terminal_field:
            if (!target.terminal || !(target.terminal->grid() == grid))
                throw std::invalid_argument("target: terminal field on a different grid");
            break;
        case TargetSpec::Kind::full_path:
            if (!target.path || !(target.path->grid() == grid))
                throw std::invalid_argument("target: path on a different grid");
            break;
        }
    }

    [[nodiscard]] std::size_t dimension() const noexcept {
        switch (target_.kind) {
        case TargetSpec::Kind::point_constraint: return 1;
        case TargetSpec::Kind::terminal_field: return grid_.size();
        case TargetSpec::Kind::full_path: return grid_.size() * static_cast<std::size_t>(grid_.nt());
        }
        return 0;
    }

    [[nodiscard]] std::vector<double> observe(const FieldPath& z) const {
        switch (target_.kind) {
        case TargetSpec::Kind::point_constraint:
            return {z.frame(static_cast<std::size_t>(target_.t_index))[target_.x_index]};
        case TargetSpec::Kind::terminal_field: {
            const auto v = z.frame(static_cast<std::size_t>(grid_.nt())).values();
            return {v.begin(), v.end()};
        }
        case TargetSpec::Kind::full_path: {
            std::vector<double> out;
            out.reserve(dimension());
            for (std::size_t j = 1; j < z.frame_count(); ++j)
                out.insert(out.end(), z.frame(j).values().begin(), z.frame(j).values().end());
            return out;
        }
        }
        return {};
    }

    [[nodiscard]] std::vector<double> target_values() const {
        switch (target_.kind) {
        case TargetSpec::Kind::point_constraint: return {target_.value};
        case TargetSpec::Kind::terminal_field: return {target_.terminal->values().begin(), target_.terminal->values().end()};
        case TargetSpec::Kind::full_path: return observe(*target_.path);
        }
        return {};
    }

    /// Transpose of observe: a path weight w with sum_j <Z_j, w_j> = y . O(Z).
    [[nodiscard]] FieldPath adjoint(std::span<const double> y) const {
        FieldPath w(grid_);
        switch (target_.kind) {
        case TargetSpec::Kind::point_constraint:
            w.frame(static_cast<std::size_t>(target_.t_index))[target_.x_index] = y[0];
            break;
        case TargetSpec::Kind::terminal_field: {
            auto dst = w.frame(static_cast<std::size_t>(grid_.nt())).values();
            std::copy(y.begin(), y.end(), dst.begin());
            break;
        }
        case TargetSpec::Kind::full_path:
            for (std::size_t j = 1; j < w.frame_count(); ++j) {
                auto dst = w.frame(j).values();
                std::copy(y.begin() + static_cast<std::ptrdiff_t>((j - 1) * grid_.size()),
                          y.begin() + static_cast<std::ptrdiff_t>(j * grid_.size()), dst.begin());
            }
            break;
        }
        return w;
    }

private:
    Grid grid_;
    const TargetSpec& target_;
};

} // namespace detail

/// Real degrees of freedom of a control: nt slots times the modes with mu > 0.
inline std::size_t control_dimension(const SpectralMeasure& measure) {
    std::size_t active = 0;
    for (double w : measure.weights())
        if (w > 0.0) ++active;
    return active * static_cast<std::size_t>(measure.grid().nt());
}

/// Least-norm evaluation of I(g). Non-convergence within 10 * (constraint
/// dimension) iterations, a final residual above tol, or a full-path target
/// with more constraints than control degrees of freedom yield
/// feasible = false and value = +inf.
inline RateResult rate_function(const Model& model, const FieldPath& u0, const TargetSpec& target,
                                double tol = 1e-8) {
    detail::require_b_prime(model);
    if (!(tol > 0.0)) throw std::invalid_argument("rate_function: tol must be positive");
    const detail::Observation obs(model.grid, target);
    const std::size_t m = obs.dimension();
    RateResult result{0.0, Control(model.grid), 0.0, 0, true, ""};

    if (target.kind == TargetSpec::Kind::full_path && m > control_dimension(model.measure)) {
        result.feasible = false;
        result.value = std::numeric_limits<double>::infinity();
        result.note = "full-path target has more constraints than control degrees of freedom";
        return result;
    }
    const auto g = obs.target_values();
    const double g_norm = std::sqrt(dot(g, g));
    if (g_norm == 0.0) return result;

    auto normal_op = [&](std::span<const double> y, std::span<double> out) {
        const Control h = apply_A_adjoint(model, u0, obs.adjoint(y));
        const auto z = obs.observe(apply_A(model, u0, h));
        std::copy(z.begin(), z.end(), out.begin());
    };
    std::vector<double> y;
    const auto cg = conjugate_gradient(normal_op, g, y, tol, static_cast<unsigned>(10 * m));
    result.iterations = cg.iterations;
    result.minimizer = apply_A_adjoint(model, u0, obs.adjoint(y));

    // True residual of the constraint, independent of the CG recursion.
    const auto z = obs.observe(apply_A(model, u0, result.minimizer));
    double r2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) r2 += (z[i] - g[i]) * (z[i] - g[i]);
    result.residual = std::sqrt(r2) / g_norm;
    result.value = 0.5 * ht_norm_sq(result.minimizer, model.measure);
    if (!cg.converged || result.residual > 10.0 * tol) {
        result.feasible = false;
        result.value = std::numeric_limits<double>::infinity();
        result.note = cg.converged ? "constraint residual above tolerance" : "conjugate gradients did not converge";
    }
    return result;
}

/// s^2 = sigma0^2 sum_k mu(k) sum_{j<m} dt R_{m-j}(k)^2, the variance of the
/// linear response at a lattice point, with R_L(k) the displacement of mode k
/// L steps after a unit velocity kick (including the b' kicks of the march).
inline double gaussian_point_variance(const Model& model, int t_index) {
    const auto& c = model.coeffs;
    if (!c.sigma_constant || !c.b_affine)
        throw std::invalid_argument("gaussian_point_rate: needs constant sigma and affine b");
    if (t_index < 0 || t_index > model.grid.nt()) throw std::out_of_range("gaussian_point_rate: time index");
    const Grid& grid = model.grid;
    const double dt = grid.dt();
    const double sigma0 = c.sigma(0.0);
    const double b1 = c.b_prime(0.0);
    const auto& mm = model.multipliers;
    KahanSum total;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (model.measure[i] == 0.0) continue;
        double u = 0.0, v = 1.0;
        KahanSum acc;
        for (int lag = 1; lag <= t_index; ++lag) {
            if (lag > 1) v += dt * b1 * u;
            const double un = mm.c[i] * u + mm.s[i] * v;
            const double vn = -mm.omega_sq[i] * mm.s[i] * u + mm.c[i] * v;
            u = un;
            v = vn;
            acc.add(u * u);
        }
        total.add(model.measure[i] * dt * acc.value());
    }
    return sigma0 * sigma0 * total.value();
}

/// Closed-form rate r^2 / (2 s^2) of a point constraint in the linear Gaussian case.
inline double gaussian_point_rate(const Model& model, int t_index, std::size_t x_index, double r) {
    if (x_index >= model.grid.size()) throw std::out_of_range("gaussian_point_rate: x index");
    const double s2 = gaussian_point_variance(model, t_index);
    if (!(s2 > 0.0)) throw std::invalid_argument("gaussian_point_rate: zero variance at the probe");
    return r * r / (2.0 * s2);
}

struct ForwardBound {
    FieldPath path;
    double bound = 0.0;
};

/// V^h together with the certified upper bound 1/2 ||h||^2_{H_T} on I_1(V^h).
inline ForwardBound ldp_forward_bound(const Model& model, const Control& h) {
    return {solve_skeleton(model, h), 0.5 * ht_norm_sq(h, model.measure)};
}

} // namespace stowave

#endif
