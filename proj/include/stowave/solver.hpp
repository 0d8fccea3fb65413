#ifndef STOWAVE_SOLVER_HPP
#define STOWAVE_SOLVER_HPP

// Spectral time marching of the field equations.
//
// Every equation shares one step. At node t_j the velocity receives a kick
// with the physical forcing F_j, then each mode evolves freely over dt:
//
//     u(j+1) = c u(j) + s (v(j) + F(j)),   v(j+1) = -w^2 s u(j) + c (v(j) + F(j)).
//
// Noise and control terms enter at the left endpoint (Ito/Walsh). The drift
// is weighted by gamma_0 = dt/2 and gamma_j = dt for j >= 1: this is the
// kick-drift-kick splitting with consecutive half kicks merged, second order
// for smooth drifts and exact for constant ones. The last half kick only
// changes the velocity and is never needed.
//
// The control pairing enters as dt * sigma(.) * C h_j with C h = inverse
// transform of mu(k) h(k); this is the noise shift dW -> dW + dt C h, so
// controlled and driven equations stay algebraically consistent.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "noise.hpp"
#include "propagator.hpp"
#include "rng.hpp"

namespace stowave {

/// Driving noise realization: generated from (seed, sample) on demand, given
/// explicitly as physical increments, or identically zero.
class NoisePath {
public:
    static NoisePath zero() { return NoisePath(Kind::zero, 0, 0, {}); }

    static NoisePath generated(std::uint64_t seed, std::uint64_t sample) {
        return NoisePath(Kind::generated, seed, sample, {});
    }

    /// One physical increment per step 0..nt-1.
    static NoisePath from_increments(std::vector<Field> increments) {
        return NoisePath(Kind::explicit_increments, 0, 0, std::move(increments));
    }

    [[nodiscard]] bool is_zero() const noexcept { return kind_ == Kind::zero; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t sample() const noexcept { return sample_; }

    [[nodiscard]] SeedCoords coords(int step) const noexcept {
        return {seed_, sample_, static_cast<std::uint32_t>(step), streams::driving};
    }

    /// Writes the physical increment of `step` into `out`.
    void increment(const SpectralMeasure& measure, int step, Transformer& tr, Spectrum& scratch,
                   std::span<double> out) const {
        switch (kind_) {
        case Kind::zero:
            std::fill(out.begin(), out.end(), 0.0);
            return;
        case Kind::generated:
            scratch.resize(measure.grid().size());
            sample_noise_spectrum(measure, measure.grid().dt(), CounterRng(coords(step)), scratch);
            tr.inverse(scratch, out);
            return;
        case Kind::explicit_increments: {
            const auto& f = increments_.at(static_cast<std::size_t>(step));
            if (f.size() != out.size()) throw std::invalid_argument("noise path: increment size mismatch");
            std::copy(f.values().begin(), f.values().end(), out.begin());
            return;
        }
        }
    }

private:
    enum class Kind { zero, generated, explicit_increments };

    NoisePath(Kind kind, std::uint64_t seed, std::uint64_t sample, std::vector<Field> inc)
        : kind_(kind), seed_(seed), sample_(sample), increments_(std::move(inc)) {}

    Kind kind_;
    std::uint64_t seed_;
    std::uint64_t sample_;
    std::vector<Field> increments_;
};

/// Drift weight of node j.
inline double drift_weight(const Grid& grid, int j) noexcept { return j == 0 ? 0.5 * grid.dt() : grid.dt(); }

namespace detail {

inline void check_finite(std::span<const double> u, int step) {
    for (double x : u)
        if (!std::isfinite(x)) throw BlowUpError(static_cast<std::size_t>(step));
}

/// Generic march. force(j, u_j, f) writes the physical forcing of step j
/// given the physical displacement u_j.
template <class Force>
FieldPath march(const Model& model, const Field& u_init, const Field& v_init, Force&& force) {
    const Grid& grid = model.grid;
    const std::size_t total = grid.size();
    Transformer tr(grid);
    Spectrum u_hat(total), v_hat(total), f_hat(total);
    tr.forward(u_init.values(), u_hat);
    tr.forward(v_init.values(), v_hat);
    std::vector<double> u(u_init.values().begin(), u_init.values().end());
    std::vector<double> f(total);
    std::vector<Field> frames;
    frames.reserve(static_cast<std::size_t>(grid.nt()) + 1);
    frames.emplace_back(u_init);
    for (int j = 0; j < grid.nt(); ++j) {
        force(j, std::span<const double>(u), std::span<double>(f));
        check_finite(f, j);
        tr.forward(f, f_hat);
        for (std::size_t i = 0; i < total; ++i) v_hat[i] += f_hat[i];
        free_step(model.multipliers, u_hat, v_hat);
        tr.inverse(u_hat, u);
        check_finite(u, j + 1);
        frames.emplace_back(grid, u);
    }
    return FieldPath(grid, std::move(frames));
}

/// Physical C h_j = inverse transform of mu(k) h_j(k).
inline void control_field(const SpectralMeasure& measure, const Control& h, int j, Transformer& tr,
                          Spectrum& scratch, std::span<double> out) {
    const auto& slot = h.slot(static_cast<std::size_t>(j));
    scratch.resize(slot.size());
    for (std::size_t i = 0; i < slot.size(); ++i) scratch[i] = measure[i] * slot[i];
    tr.inverse(scratch, out);
}

inline void require_b_prime(const Model& model) {
    if (!model.coeffs.has_b_prime())
        throw HypothesisError("(D)", "this equation needs b' but coefficients '" + model.coeffs.name +
                                         "' do not provide it");
}

inline void require_grid(const Model& model, const Grid& other, const char* what) {
    if (!(model.grid == other)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

} // namespace detail

/// u^eps: forcing gamma_j b(u) + sqrt(eps) sigma(u) dW_j.
inline FieldPath solve_spde(const Model& model, double eps, const NoisePath& noise) {
    if (!(eps >= 0.0)) throw std::invalid_argument("solve_spde: eps must be >= 0");
    const auto [u0, v0] = initial_fields(model.init, model.grid);
    const bool driven = eps > 0.0 && !noise.is_zero();
    const double amp = std::sqrt(eps);
    Transformer tr(model.grid);
    Spectrum scratch;
    std::vector<double> dw(model.grid.size());
    const auto& c = model.coeffs;
    return detail::march(model, u0, v0, [&](int j, std::span<const double> u, std::span<double> f) {
        const double g = drift_weight(model.grid, j);
        if (driven) {
            noise.increment(model.measure, j, tr, scratch, dw);
            for (std::size_t x = 0; x < u.size(); ++x) f[x] = g * c.b(u[x]) + amp * c.sigma(u[x]) * dw[x];
        } else {
            for (std::size_t x = 0; x < u.size(); ++x) f[x] = g * c.b(u[x]);
        }
    });
}

/// u0: the same recursion with the noise switched off.
inline FieldPath solve_deterministic(const Model& model) { return solve_spde(model, 0.0, NoisePath::zero()); }

/// Y: forcing sigma(u0) dW_j + gamma_j b'(u0) Y, zero initial data.
inline FieldPath solve_first_order(const Model& model, const FieldPath& u0, const NoisePath& noise) {
    detail::require_b_prime(model);
    detail::require_grid(model, u0.grid(), "solve_first_order");
    const Field zero(model.grid);
    Transformer tr(model.grid);
    Spectrum scratch;
    std::vector<double> dw(model.grid.size());
    const auto& c = model.coeffs;
    return detail::march(model, zero, zero, [&](int j, std::span<const double> y, std::span<double> f) {
        const double g = drift_weight(model.grid, j);
        const Field& base = u0.frame(static_cast<std::size_t>(j));
        noise.increment(model.measure, j, tr, scratch, dw);
        for (std::size_t x = 0; x < y.size(); ++x)
            f[x] = c.sigma(base[x]) * dw[x] + g * c.b_prime(base[x]) * y[x];
    });
}

/// q_eps = Y / h(eps).
inline FieldPath q_epsilon(const FieldPath& y, const DeviationScale& scale, double eps) {
    const double inv = 1.0 / scale.h(eps);
    std::vector<Field> frames;
    for (const auto& f : y.frames()) {
        Field g(f);
        for (auto& v : g.values()) v *= inv;
        frames.push_back(std::move(g));
    }
    return FieldPath(y.grid(), std::move(frames));
}

/// V^h: forcing gamma_j b(V) + dt sigma(V) C h_j, initial data as u0.
inline FieldPath solve_skeleton(const Model& model, const Control& h) {
    detail::require_grid(model, h.grid(), "solve_skeleton");
    const auto [u0, v0] = initial_fields(model.init, model.grid);
    Transformer tr(model.grid);
    Spectrum scratch;
    std::vector<double> ch(model.grid.size());
    const double dt = model.grid.dt();
    const auto& c = model.coeffs;
    return detail::march(model, u0, v0, [&](int j, std::span<const double> u, std::span<double> f) {
        const double g = drift_weight(model.grid, j);
        detail::control_field(model.measure, h, j, tr, scratch, ch);
        for (std::size_t x = 0; x < u.size(); ++x) f[x] = g * c.b(u[x]) + dt * c.sigma(u[x]) * ch[x];
    });
}

/// Z^h = A h: forcing dt sigma(u0) C h_j + gamma_j b'(u0) Z, zero initial data.
inline FieldPath solve_linear_skeleton(const Model& model, const FieldPath& u0, const Control& h) {
    detail::require_b_prime(model);
    detail::require_grid(model, u0.grid(), "solve_linear_skeleton");
    detail::require_grid(model, h.grid(), "solve_linear_skeleton");
    const Field zero(model.grid);
    Transformer tr(model.grid);
    Spectrum scratch;
    std::vector<double> ch(model.grid.size());
    const double dt = model.grid.dt();
    const auto& c = model.coeffs;
    return detail::march(model, zero, zero, [&](int j, std::span<const double> z, std::span<double> f) {
        const double g = drift_weight(model.grid, j);
        const Field& base = u0.frame(static_cast<std::size_t>(j));
        detail::control_field(model.measure, h, j, tr, scratch, ch);
        for (std::size_t x = 0; x < z.size(); ++x)
            f[x] = dt * c.sigma(base[x]) * ch[x] + g * c.b_prime(base[x]) * z[x];
    });
}

inline FieldPath apply_A(const Model& model, const FieldPath& u0, const Control& h) {
    return solve_linear_skeleton(model, u0, h);
}

/// Adjoint of A between the path pairing sum_j sum_x Z_j(x) w_j(x) (frames
/// 0..nt) and the H_T inner product: <A h, w> = <h, A* w>_{H_T}.
/// Obtained by transposing the march step by step in reverse order.
inline Control apply_A_adjoint(const Model& model, const FieldPath& u0, const FieldPath& w) {
    detail::require_b_prime(model);
    detail::require_grid(model, u0.grid(), "apply_A_adjoint");
    detail::require_grid(model, w.grid(), "apply_A_adjoint");
    const Grid& grid = model.grid;
    const std::size_t total = grid.size();
    const double n_points = static_cast<double>(total);
    const auto& mm = model.multipliers;
    const auto& c = model.coeffs;
    Transformer tr(grid);
    Spectrum ub(total), vb(total), ft(total), tmp(total);
    std::vector<double> q(total), phys(total);
    std::vector<Spectrum> slots(static_cast<std::size_t>(grid.nt()), Spectrum(total));

    // Adjoint variables are carried in the spectral pairing N Re sum a conj(b),
    // under which the transpose of the forward transform is Re(inverse).
    tr.forward(w.frame(static_cast<std::size_t>(grid.nt())).values(), ub);
    std::fill(vb.begin(), vb.end(), cplx{});
    for (int j = grid.nt() - 1; j >= 0; --j) {
        for (std::size_t i = 0; i < total; ++i) {
            const cplx un = mm.c[i] * ub[i] - mm.omega_sq[i] * mm.s[i] * vb[i];
            const cplx vn = mm.s[i] * ub[i] + mm.c[i] * vb[i];
            ub[i] = un;
            vb[i] = vn;
        }
        tr.inverse(vb, q);
        const Field& base = u0.frame(static_cast<std::size_t>(j));
        const double g = drift_weight(grid, j);
        for (std::size_t x = 0; x < total; ++x) phys[x] = n_points * c.sigma(base[x]) * q[x];
        tr.forward(phys, slots[static_cast<std::size_t>(j)]);
        const Field& wj = w.frame(static_cast<std::size_t>(j));
        for (std::size_t x = 0; x < total; ++x) phys[x] = wj[x] + g * c.b_prime(base[x]) * q[x];
        tr.forward(phys, tmp);
        for (std::size_t i = 0; i < total; ++i) ub[i] += tmp[i];
    }
    return Control(model.measure, std::move(slots));
}

/// Z^{eps,v}: U = u0 + a Z with a = sqrt(eps) h(eps); forcing
/// (1/h) sigma(U) dW_j + dt sigma(U) C v_j + gamma_j (b(U) - b(u0)) / a.
inline FieldPath solve_controlled(const Model& model, const FieldPath& u0, double eps, const Control& v,
                                  const NoisePath& noise) {
    if (!(eps > 0.0)) throw std::invalid_argument("solve_controlled: eps must be > 0");
    detail::require_grid(model, u0.grid(), "solve_controlled");
    detail::require_grid(model, v.grid(), "solve_controlled");
    const double hh = model.scale.h(eps);
    const double a = std::sqrt(eps) * hh;
    const double inv_h = 1.0 / hh;
    const bool driven = !noise.is_zero();
    const bool controlled = !v.is_zero();
    const Field zero(model.grid);
    Transformer tr(model.grid);
    Spectrum scratch;
    std::vector<double> dw(model.grid.size(), 0.0), cv(model.grid.size(), 0.0);
    const double dt = model.grid.dt();
    const auto& c = model.coeffs;
    return detail::march(model, zero, zero, [&](int j, std::span<const double> z, std::span<double> f) {
        const double g = drift_weight(model.grid, j);
        const Field& base = u0.frame(static_cast<std::size_t>(j));
        if (driven) noise.increment(model.measure, j, tr, scratch, dw);
        if (controlled) detail::control_field(model.measure, v, j, tr, scratch, cv);
        for (std::size_t x = 0; x < z.size(); ++x) {
            const double big_u = base[x] + a * z[x];
            const double s = c.sigma(big_u);
            f[x] = inv_h * s * dw[x] + dt * s * cv[x] + g * (c.b(big_u) - c.b(base[x])) / a;
        }
    });
}

/// Elementwise (a - b) * scale.
inline FieldPath path_difference(const FieldPath& a, const FieldPath& b, double scale = 1.0) {
    if (!(a.grid() == b.grid())) throw std::invalid_argument("path_difference: grid mismatch");
    std::vector<Field> frames;
    frames.reserve(a.frame_count());
    for (std::size_t j = 0; j < a.frame_count(); ++j) {
        std::vector<double> v(a.grid().size());
        for (std::size_t x = 0; x < v.size(); ++x) v[x] = (a.frame(j)[x] - b.frame(j)[x]) * scale;
        frames.emplace_back(a.grid(), std::move(v));
    }
    return FieldPath(a.grid(), std::move(frames));
}

/// |a - b|_{T,inf}: max over all frames and points.
inline double sup_distance(const FieldPath& a, const FieldPath& b) {
    if (!(a.grid() == b.grid())) throw std::invalid_argument("sup_distance: grid mismatch");
    double m = 0.0;
    for (std::size_t j = 0; j < a.frame_count(); ++j)
        for (std::size_t x = 0; x < a.grid().size(); ++x) m = std::max(m, std::abs(a.frame(j)[x] - b.frame(j)[x]));
    return m;
}

inline double sup_norm(const FieldPath& a) { return sup_norm_path(a, a.frame_count() - 1); }

/// Diagnostic: plugs a deterministic path into the discrete mild equation
/// u_m = w_m + sum_{j<m} S(t_m - t_j) F_j with F_j = gamma_j b(u_j) and returns
/// the largest pointwise mismatch. Quadratic in nt; meant for small runs.
inline double mild_residual(const Model& model, const FieldPath& u) {
    detail::require_grid(model, u.grid(), "mild_residual");
    const Grid& grid = model.grid;
    const std::size_t total = grid.size();
    Transformer tr(grid);
    std::vector<Spectrum> kicks;
    std::vector<double> f(total);
    for (int j = 0; j < grid.nt(); ++j) {
        const Field& uj = u.frame(static_cast<std::size_t>(j));
        const double g = drift_weight(grid, j);
        for (std::size_t x = 0; x < total; ++x) f[x] = g * model.coeffs.b(uj[x]);
        Spectrum k(total);
        tr.forward(f, k);
        kicks.push_back(std::move(k));
    }
    double worst = 0.0;
    Spectrum acc(total);
    std::vector<double> phys(total);
    for (int m = 0; m <= grid.nt(); ++m) {
        const Field w = homogeneous_solution(model.init, grid, m);
        std::fill(acc.begin(), acc.end(), cplx{});
        for (int j = 0; j < m; ++j) {
            const double lag = (m - j) * grid.dt();
            for (std::size_t i = 0; i < total; ++i) acc[i] += wave_multiplier(lag, grid.omega(i)).s * kicks[j][i];
        }
        tr.inverse(acc, phys);
        const Field& um = u.frame(static_cast<std::size_t>(m));
        for (std::size_t x = 0; x < total; ++x) worst = std::max(worst, std::abs(um[x] - w[x] - phys[x]));
    }
    return worst;
}

/// Per-frame sup norms as CSV with header "step,t,sup_abs".
inline void write_trace_csv(std::ostream& os, const FieldPath& path) {
    os << "step,t,sup_abs\n";
    std::ostringstream line;
    line.precision(17);
    for (std::size_t j = 0; j < path.frame_count(); ++j) {
        line.str("");
        line << j << ',' << j * path.grid().dt() << ',' << path.frame(j).max_abs() << '\n';
        os << line.str();
    }
}

} // namespace stowave

#endif
