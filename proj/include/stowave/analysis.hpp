#ifndef STOWAVE_ANALYSIS_HPP
#define STOWAVE_ANALYSIS_HPP

// Monte Carlo estimators for the scaling laws of the driven equation:
// sup-norm moments and their eps exponents, Hoelder increment exponents,
// moderate-deviation tails and the weak-continuity scan of Z^h.
//
// Sample s of any estimator uses NoisePath::generated(seed, s), so runs with
// the same seed are coupled across eps and bit-identical for any worker count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lattice.hpp"
#include "noise.hpp"
#include "parallel.hpp"
#include "propagator.hpp"
#include "ratefn.hpp"
#include "solver.hpp"
#include "stats.hpp"

namespace stowave {

enum class Quantity { sup_diff, clt_diff, point_diff };

inline Quantity parse_quantity(const std::string& name) {
    if (name == "sup_diff") return Quantity::sup_diff;
    if (name == "clt_diff") return Quantity::clt_diff;
    if (name == "point_diff") return Quantity::point_diff;
    throw std::invalid_argument("unknown quantity '" + name + "' (expected sup_diff, clt_diff or point_diff)");
}

inline const char* quantity_name(Quantity q) {
    switch (q) {
    case Quantity::sup_diff: return "sup_diff";
    case Quantity::clt_diff: return "clt_diff";
    case Quantity::point_diff: return "point_diff";
    }
    return "";
}

struct Probe {
    int t_index = 0;
    std::size_t x_index = 0;
};

struct MCResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    double p = 2.0;
    double eps = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

/// Per-sample values of the chosen quantity (before raising to p).
inline std::vector<double> mc_samples(const Model& model, const FieldPath& u0, double eps, std::size_t n_samples,
                                      Quantity quantity, std::uint64_t seed, unsigned workers,
                                      const Probe& probe = {}) {
    if (!(eps > 0.0)) throw std::invalid_argument("mc_moment: eps must be positive");
    if (quantity == Quantity::point_diff &&
        (probe.t_index < 0 || probe.t_index > model.grid.nt() || probe.x_index >= model.grid.size()))
        throw std::out_of_range("mc_moment: probe outside the grid");
    std::vector<double> values(n_samples);
    parallel_for(n_samples, workers, [&](std::size_t s) {
        const auto noise = NoisePath::generated(seed, s);
        const auto ue = solve_spde(model, eps, noise);
        switch (quantity) {
        case Quantity::sup_diff:
            values[s] = sup_distance(ue, u0);
            break;
        case Quantity::clt_diff: {
            const auto y = solve_first_order(model, u0, noise);
            const double inv = 1.0 / std::sqrt(eps);
            double m = 0.0;
            for (std::size_t j = 0; j < ue.frame_count(); ++j)
                for (std::size_t x = 0; x < model.grid.size(); ++x)
                    m = std::max(m, std::abs((ue.frame(j)[x] - u0.frame(j)[x]) * inv - y.frame(j)[x]));
            values[s] = m;
            break;
        }
        case Quantity::point_diff: {
            const auto t = static_cast<std::size_t>(probe.t_index);
            values[s] = std::abs(ue.frame(t)[probe.x_index] - u0.frame(t)[probe.x_index]);
            break;
        }
        }
    });
    return values;
}

/// Estimate of E[quantity^p] with a jackknife standard error.
inline MCResult mc_moment(const Model& model, const FieldPath& u0, double eps, double p, std::size_t n_samples,
                          Quantity quantity, std::uint64_t seed, unsigned workers = 1, const Probe& probe = {}) {
    if (!(p >= 2.0)) throw std::invalid_argument("mc_moment: p must be >= 2");
    if (n_samples < 16) throw std::invalid_argument("mc_moment: need at least 16 samples");
    auto values = mc_samples(model, u0, eps, n_samples, quantity, seed, workers, probe);
    for (auto& v : values) v = std::pow(v, p);
    const auto est = jackknife_mean(values);
    MCResult r;
    r.estimate = est.mean;
    r.std_error = est.std_error;
    r.n_samples = n_samples;
    r.p = p;
    r.eps = eps;
    r.seed = seed;
    return r;
}

struct RateFit {
    std::vector<double> eps;
    std::vector<double> log_moments;
    double slope = 0.0;
    double slope_std_error = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    /// eps values whose estimates were non-positive and left out of the fit.
    std::vector<double> dropped;
};

/// Smallest ratio eps_max / eps_min accepted by fit_rate.
inline constexpr double min_eps_span = 64.0;

/// OLS of log estimate on log eps. The eps grid must be strictly decreasing,
/// have >= 3 points and span a ratio >= 64.
inline RateFit fit_rate(std::span<const MCResult> results) {
    if (results.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 eps values");
    for (std::size_t i = 1; i < results.size(); ++i)
        if (!(results[i].eps < results[i - 1].eps))
            throw std::invalid_argument("fit_rate: eps grid must be strictly decreasing");
    if (results.front().eps / results.back().eps < min_eps_span * (1.0 - 1e-12))
        throw std::invalid_argument("fit_rate: eps grid spans too narrow a range");
    RateFit fit;
    std::vector<double> x;
    for (const auto& r : results) {
        if (!(r.estimate > 0.0)) {
            fit.dropped.push_back(r.eps);
            continue;
        }
        fit.eps.push_back(r.eps);
        x.push_back(std::log(r.eps));
        fit.log_moments.push_back(std::log(r.estimate));
    }
    if (fit.eps.size() < 3)
        throw std::invalid_argument("fit_rate: fewer than 3 positive estimates survive (" +
                                    std::to_string(fit.dropped.size()) + " dropped)");
    const auto lf = ols(x, fit.log_moments);
    fit.slope = lf.slope;
    fit.slope_std_error = lf.slope_std_error;
    fit.intercept = lf.intercept;
    fit.r_squared = lf.r_squared;
    return fit;
}

enum class HolderAxis { time, space };

struct HolderEstimate {
    HolderAxis axis = HolderAxis::time;
    std::vector<double> separations;
    std::vector<double> moments;
    double p = 2.0;
    double slope = 0.0;
    double alpha = 0.0;
    double alpha_std_error = 0.0;
    bool degenerate = false;
    Window window;
};

/// Increment moments E|g(z + d e) - g(z)|^p over dyadic lags d = 1, 2, 4, ...
/// (up to half the window extent) along one axis, pooled over the window and
/// all paths, then alpha = slope / p of the log-log regression. Needs at least
/// 4 lags; constant inputs are flagged degenerate.
inline HolderEstimate holder_from_paths(std::span<const FieldPath> paths, double p, HolderAxis axis,
                                        const Window& window) {
    if (paths.empty()) throw std::invalid_argument("holder: no paths");
    if (!(p > 0.0)) throw std::invalid_argument("holder: p must be positive");
    const Grid& grid = paths.front().grid();
    detail::check_window(grid, window);
    const int extent = axis == HolderAxis::time ? window.t_hi - window.t_lo : window.hi[0] - window.lo[0] - 1;
    std::vector<int> lags;
    for (int d = 1; 2 * d <= extent; d *= 2) lags.push_back(d);
    if (lags.size() < 4) throw std::invalid_argument("holder: insufficient dyadic scales in the window");

    HolderEstimate est;
    est.axis = axis;
    est.p = p;
    est.window = window;
    const auto pts = detail::window_points(grid, window);
    for (int d : lags) {
        KahanSum acc;
        std::size_t count = 0;
        for (const auto& path : paths) {
            if (axis == HolderAxis::time) {
                for (int t = window.t_lo; t + d <= window.t_hi; ++t) {
                    const Field& a = path.frame(static_cast<std::size_t>(t));
                    const Field& b = path.frame(static_cast<std::size_t>(t + d));
                    for (std::size_t x : pts) {
                        acc.add(std::pow(std::abs(b[x] - a[x]), p));
                        ++count;
                    }
                }
            } else {
                for (int t = window.t_lo; t <= window.t_hi; ++t) {
                    const Field& f = path.frame(static_cast<std::size_t>(t));
                    for (std::size_t x : pts) {
                        std::array<int, 3> idx{};
                        for (int a = 0; a < grid.dim(); ++a) idx[a] = grid.axis_index(x, a);
                        idx[0] += d;
                        if (idx[0] >= window.hi[0]) continue;
                        acc.add(std::pow(std::abs(f[grid.flat(idx)] - f[x]), p));
                        ++count;
                    }
                }
            }
        }
        est.separations.push_back(d * (axis == HolderAxis::time ? grid.dt() : grid.spacing()));
        est.moments.push_back(count > 0 ? acc.value() / static_cast<double>(count) : 0.0);
    }
    const double top = *std::max_element(est.moments.begin(), est.moments.end());
    if (!(top > 1e-300) || std::any_of(est.moments.begin(), est.moments.end(), [](double m) { return !(m > 0.0); })) {
        est.degenerate = true;
        return est;
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < lags.size(); ++i) {
        lx.push_back(std::log(est.separations[i]));
        ly.push_back(std::log(est.moments[i]));
    }
    const auto lf = ols(lx, ly);
    est.slope = lf.slope;
    est.alpha = lf.slope / p;
    est.alpha_std_error = lf.slope_std_error / p;
    return est;
}

/// Hoelder estimate of u^eps over n_samples paths, or of u0 alone when eps = 0.
inline HolderEstimate holder_estimate(const Model& model, double eps, double p, std::size_t n_samples,
                                      HolderAxis axis, std::uint64_t seed, unsigned workers = 1,
                                      std::optional<Window> window = std::nullopt) {
    const Window w = window ? *window : default_window(model.grid);
    if (eps == 0.0) {
        const auto u0 = solve_deterministic(model);
        return holder_from_paths(std::span<const FieldPath>(&u0, 1), p, axis, w);
    }
    if (n_samples < 1) throw std::invalid_argument("holder: need at least one sample");
    std::vector<FieldPath> paths(n_samples, FieldPath(model.grid));
    parallel_for(n_samples, workers,
                 [&](std::size_t s) { paths[s] = solve_spde(model, eps, NoisePath::generated(seed, s)); });
    return holder_from_paths(paths, p, axis, w);
}

struct TailResult {
    double probability = 0.0;
    double std_error = 0.0;
    std::size_t exceedances = 0;
    std::size_t n_samples = 0;
    /// True when no exceedance was observed; probability is then the 95%
    /// upper bound 3/n instead of a point estimate.
    bool upper_bound = false;
    double h = 0.0;
    /// -log P / h^2
    double normalized = 0.0;
    /// Linear Gaussian case only (otherwise NaN): s^2, 2 Phi(-r h / s),
    /// r^2 / (2 s^2) and the expected exceedance count n * closed_form.
    double variance = std::numeric_limits<double>::quiet_NaN();
    double closed_form = std::numeric_limits<double>::quiet_NaN();
    double gaussian_rate = std::numeric_limits<double>::quiet_NaN();
    double expected_count = std::numeric_limits<double>::quiet_NaN();
};

/// Plain Monte Carlo estimate of P(|Z^eps(probe)| > r) with
/// Z^eps = (u^eps - u0) / (sqrt(eps) h(eps)).
inline TailResult tail_probability(const Model& model, const FieldPath& u0, double eps, double r,
                                   std::size_t n_samples, const Probe& probe, std::uint64_t seed,
                                   unsigned workers = 1) {
    if (!(eps > 0.0)) throw std::invalid_argument("tail_probability: eps must be positive");
    if (n_samples < 2) throw std::invalid_argument("tail_probability: need at least 2 samples");
    model.scale.validate();
    TailResult res;
    res.n_samples = n_samples;
    res.h = model.scale.h(eps);
    if (model.coeffs.sigma_constant && model.coeffs.b_affine && model.coeffs.has_b_prime()) {
        res.variance = gaussian_point_variance(model, probe.t_index);
        res.closed_form = 2.0 * normal_sf(r * res.h / std::sqrt(res.variance));
        res.gaussian_rate = r * r / (2.0 * res.variance);
        res.expected_count = res.closed_form * static_cast<double>(n_samples);
    }
    if (r <= 0.0) {
        res.probability = 1.0;
        res.exceedances = n_samples;
        res.normalized = 0.0;
        return res;
    }
    const auto values = mc_samples(model, u0, eps, n_samples, Quantity::point_diff, seed, workers, probe);
    const double scale = 1.0 / (std::sqrt(eps) * res.h);
    for (double v : values)
        if (v * scale > r) ++res.exceedances;
    const double n = static_cast<double>(n_samples);
    if (res.exceedances == 0) {
        res.upper_bound = true;
        res.probability = 3.0 / n;
    } else {
        res.probability = static_cast<double>(res.exceedances) / n;
    }
    res.std_error = std::sqrt(res.probability * (1.0 - res.probability) / n);
    res.normalized = -std::log(res.probability) / (res.h * res.h);
    return res;
}

struct WeakContinuityReport {
    std::vector<int> j_values;
    std::vector<double> distances;
    double reference_sup = 0.0;
    double tolerance_ratio = 0.05;
    bool tail_nonincreasing = false;
    bool below_tolerance = false;

    [[nodiscard]] bool pass() const noexcept { return tail_nonincreasing && below_tolerance; }
};

/// Scans h_j = h + sin(2^j pi t / T) g over j and reports sup |Z^{h_j} - Z^h|.
/// The perturbations converge weakly, not strongly, to zero.
inline WeakContinuityReport weak_continuity_check(const Model& model, const FieldPath& u0, const Control& h,
                                                  const Field& g, const std::vector<int>& j_values,
                                                  double tolerance_ratio = 0.05) {
    if (!(g.grid() == model.grid)) throw std::invalid_argument("weak_continuity_check: profile grid mismatch");
    WeakContinuityReport rep;
    rep.j_values = j_values;
    rep.tolerance_ratio = tolerance_ratio;
    const auto zh = apply_A(model, u0, h);
    rep.reference_sup = sup_norm(zh);
    const auto g_hat = forward_transform(g);
    const double horizon = model.grid.horizon();
    for (int j : j_values) {
        std::vector<Spectrum> slots;
        for (int i = 0; i < model.grid.nt(); ++i) {
            const double w = std::sin(std::ldexp(1.0, j) * std::numbers::pi * i * model.grid.dt() / horizon);
            Spectrum s(h.slot(static_cast<std::size_t>(i)));
            for (std::size_t k = 0; k < s.size(); ++k) s[k] += w * g_hat[k];
            slots.push_back(std::move(s));
        }
        const Control hn(model.measure, std::move(slots));
        rep.distances.push_back(sup_distance(apply_A(model, u0, hn), zh));
    }
    rep.tail_nonincreasing = true;
    for (std::size_t i = 0; i + 1 < j_values.size(); ++i)
        if (j_values[i] >= 2 && rep.distances[i + 1] > rep.distances[i]) rep.tail_nonincreasing = false;
    rep.below_tolerance = !rep.distances.empty() && rep.distances.back() <= tolerance_ratio * rep.reference_sup;
    return rep;
}

} // namespace stowave

#endif
