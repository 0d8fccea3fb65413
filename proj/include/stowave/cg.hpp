#ifndef STOWAVE_CG_HPP
#define STOWAVE_CG_HPP

// Conjugate gradients for a symmetric positive semi-definite operator given
// as a callable apply(x, out). Starts from x = 0, so on a singular but
// consistent system the iterates stay in the range and converge to the
// minimum-norm solution.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "stats.hpp"

namespace stowave {

struct CgResult {
    unsigned iterations = 0;
    double residual_norm = 0.0;
    bool converged = false;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    KahanSum acc;
    for (std::size_t i = 0; i < a.size(); ++i) acc.add(a[i] * b[i]);
    return acc.value();
}

/// Solves M x = b to ||b - M x|| <= tol ||b|| within max_iter iterations.
template <class Apply>
CgResult conjugate_gradient(Apply&& apply, std::span<const double> b, std::vector<double>& x, double tol,
                            unsigned max_iter) {
    const std::size_t n = b.size();
    x.assign(n, 0.0);
    std::vector<double> r(b.begin(), b.end()), p(r), q(n);
    double rr = dot(r, r);
    const double target = tol * std::sqrt(rr);
    CgResult result;
    result.residual_norm = std::sqrt(rr);
    if (result.residual_norm <= target || rr == 0.0) {
        result.converged = true;
        return result;
    }
    while (result.iterations < max_iter) {
        ++result.iterations;
        apply(std::span<const double>(p), std::span<double>(q));
        const double pq = dot(p, q);
        if (!(pq > 0.0)) break; // direction outside the range: breakdown
        const double alpha = rr / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        const double rr_new = dot(r, r);
        result.residual_norm = std::sqrt(rr_new);
        if (result.residual_norm <= target) {
            result.converged = true;
            break;
        }
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    return result;
}

} // namespace stowave

#endif
