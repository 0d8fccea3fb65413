#ifndef STOWAVE_STATS_HPP
#define STOWAVE_STATS_HPP

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace stowave {

/// Neumaier-compensated accumulator.
class KahanSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    KahanSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Sample mean with its delete-one jackknife standard error. For the mean the
/// jackknife reduces to s/sqrt(n); it is computed from the leave-one-out means
/// so the same routine serves nonlinear statistics if needed.
inline MeanEstimate jackknife_mean(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n < 2) throw std::invalid_argument("jackknife needs at least two samples");
    const double total = compensated_sum(xs);
    const double mean = total / static_cast<double>(n);
    KahanSum dev;
    for (double x : xs) {
        const double loo = (total - x) / static_cast<double>(n - 1);
        dev.add((loo - mean) * (loo - mean));
    }
    const double var = static_cast<double>(n - 1) / static_cast<double>(n) * dev.value();
    return {mean, std::sqrt(var)};
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_std_error = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit ols(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("ols: need matching inputs with n >= 2");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0) throw std::invalid_argument("ols: degenerate abscissae");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        sse += r * r;
    }
    fit.slope_std_error = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
    fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    return fit;
}

/// P(N > x) for a standard normal N.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// x such that P(N > x) = q, for q in (0, 1).
inline double normal_isf(double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("normal_isf: q must lie in (0,1)");
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (normal_sf(mid) > q)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace stowave

#endif
