#ifndef STOWAVE_NOISE_HPP
#define STOWAVE_NOISE_HPP

// Gaussian noise white in time and spatially correlated through a Riesz-type
// kernel f(x) = phi(x) |x|^{-beta}.
//
// The lattice covariance is defined by its spectral weights mu(k): a noise
// increment over one step has independent mode coefficients W(k) (up to the
// Hermitian pairing W(-k) = conj W(k)) with E|W(k)|^2 = dt * mu(k) in the
// forward normalization of lattice.hpp. The matching inner product is
//
//     <a, b>_H = sum_k mu(k) a(k) conj(b(k)),
//
// so that E[F(phi) F(psi)] = dt * <phi, psi>_H for the pairing
// F(phi) = (1/N) sum_x phi(x) dW(x). The zero mode carries no weight.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace stowave {

/// Random stream identifiers; keep them distinct so checks never reuse the
/// variates that drive solver paths.
namespace streams {
inline constexpr std::uint32_t driving = 0;
inline constexpr std::uint32_t covariance_check = 1;
inline constexpr std::uint32_t mode_check = 2;
} // namespace streams

struct Taper {
    enum class Kind { none, bump };
    Kind kind = Kind::none;
    /// phi(x) = 1 + amplitude * exp(-|x|^2 / (2 width^2)) for the bump.
    double amplitude = 0.5;
    double width = 0.0; // 0 selects L/8

    [[nodiscard]] double operator()(double r, double length) const noexcept {
        if (kind == Kind::none) return 1.0;
        const double w = width > 0.0 ? width : length / 8.0;
        return 1.0 + amplitude * std::exp(-0.5 * r * r / (w * w));
    }
};

struct CovarianceSpec {
    double beta = 1.0;
    double amplitude = 1.0;
    Taper taper{};
    int dim = 3;

    /// Admissible exponents: (0,2) in three dimensions, (0,1) in one.
    void validate() const {
        if (dim != 1 && dim != 3) throw HypothesisError("H.2", "covariance dimension must be 1 or 3");
        const double upper = dim == 3 ? 2.0 : 1.0;
        if (!(beta > 0.0 && beta < upper))
            throw HypothesisError("H.2", "beta = " + std::to_string(beta) + " outside (0, " +
                                             std::to_string(upper).substr(0, 3) + ") for dim " +
                                             std::to_string(dim));
        if (!(amplitude > 0.0) || !std::isfinite(amplitude))
            throw HypothesisError("H.2", "covariance amplitude must be positive");
        if (taper.kind == Taper::Kind::bump && (!(taper.amplitude >= 0.0) || taper.width < 0.0))
            throw HypothesisError("H.2", "taper must be bounded and positive");
    }
};

/// Per-mode spectral weights mu(k) >= 0 with mu(0) = 0 and mu(k) = mu(-k).
class SpectralMeasure {
public:
    SpectralMeasure(Grid grid, std::vector<double> weights) : grid_(std::move(grid)), weights_(std::move(weights)) {
        if (weights_.size() != grid_.size()) throw std::invalid_argument("spectral measure: size mismatch");
        max_ = 0.0;
        for (double w : weights_) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("spectral measure: invalid weight");
            max_ = std::max(max_, w);
        }
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return weights_[i]; }
    [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
    [[nodiscard]] double max() const noexcept { return max_; }

private:
    Grid grid_;
    std::vector<double> weights_;
    double max_ = 0.0;
};

inline SpectralMeasure spectral_density(const CovarianceSpec& spec, const Grid& grid) {
    spec.validate();
    if (spec.dim != grid.dim()) throw std::invalid_argument("spectral_density: spec and grid dimensions differ");
    const std::size_t total = grid.size();
    std::vector<double> mu(total, 0.0);
    for (std::size_t i = 1; i < total; ++i) mu[i] = spec.amplitude * std::pow(grid.omega(i), spec.beta - grid.dim());

    if (spec.taper.kind != Taper::Kind::none) {
        // Multiplying the kernel by phi in physical space is a circular
        // convolution of the weights with the transform of phi.
        Spectrum kernel(total);
        for (std::size_t i = 0; i < total; ++i) kernel[i] = mu[i];
        Transformer tr(grid);
        std::vector<double> phys(total);
        tr.inverse(kernel, phys);
        const double half = grid.length() / 2.0;
        for (std::size_t p = 0; p < total; ++p) {
            const auto x = grid.coordinate(p);
            double r2 = 0.0;
            for (int a = 0; a < grid.dim(); ++a) {
                const double d = x[a] > half ? x[a] - grid.length() : x[a];
                r2 += d * d;
            }
            phys[p] *= spec.taper(std::sqrt(r2), grid.length());
        }
        tr.forward(phys, kernel);
        for (std::size_t i = 0; i < total; ++i) mu[i] = std::max(0.0, kernel[i].real());
        for (std::size_t i = 0; i < total; ++i) {
            const std::size_t j = grid.conjugate(i);
            if (i < j) mu[i] = mu[j] = 0.5 * (mu[i] + mu[j]);
        }
    }
    mu[0] = 0.0;
    return SpectralMeasure(grid, std::move(mu));
}

/// Fills `out` with the spectral coefficients of one noise increment.
inline void sample_noise_spectrum(const SpectralMeasure& measure, double dt, const CounterRng& rng,
                                  std::span<cplx> out) {
    const Grid& grid = measure.grid();
    if (out.size() != grid.size()) throw std::invalid_argument("noise: size mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t j = grid.conjugate(i);
        if (j < i) continue;
        const double var = dt * measure[i];
        if (var == 0.0) {
            out[i] = 0.0;
            out[j] = 0.0;
            continue;
        }
        const auto g = rng.normal_pair(static_cast<std::uint32_t>(i));
        if (j == i) {
            out[i] = cplx(g[0] * std::sqrt(var), 0.0);
        } else {
            const double scale = std::sqrt(0.5 * var);
            out[i] = cplx(g[0] * scale, g[1] * scale);
            out[j] = std::conj(out[i]);
        }
    }
}

struct NoiseIncrement {
    Field field;
    SeedCoords coords;
};

inline NoiseIncrement sample_noise_increment(const SpectralMeasure& measure, double dt, const SeedCoords& coords) {
    if (!(dt > 0.0)) throw std::invalid_argument("noise: dt must be positive");
    Spectrum spec(measure.grid().size());
    sample_noise_spectrum(measure, dt, CounterRng(coords), spec);
    return {inverse_transform(measure.grid(), spec), coords};
}

inline double h_inner_spectral(std::span<const cplx> a, std::span<const cplx> b, const SpectralMeasure& measure) {
    KahanSum acc;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (measure[i] != 0.0) acc.add(measure[i] * (a[i].real() * b[i].real() + a[i].imag() * b[i].imag()));
    return acc.value();
}

/// <a, b>_H = sum_k mu(k) a(k) conj(b(k)).
inline double h_inner(const Field& a, const Field& b, const SpectralMeasure& measure) {
    if (!(a.grid() == measure.grid()) || !(b.grid() == measure.grid()))
        throw std::invalid_argument("h_inner: grid mismatch");
    return h_inner_spectral(forward_transform(a), forward_transform(b), measure);
}

/// Element of L^2([0,T]; H) on the lattice: one spectral coefficient set per
/// time slot, restricted to modes with mu(k) > 0.
class Control {
public:
    /// Zero control.
    explicit Control(Grid grid)
        : grid_(std::move(grid)), slots_(static_cast<std::size_t>(grid_.nt()), Spectrum(grid_.size())) {}

    Control(const SpectralMeasure& measure, std::vector<Spectrum> slots)
        : grid_(measure.grid()), slots_(std::move(slots)) {
        if (slots_.size() != static_cast<std::size_t>(grid_.nt())) throw std::invalid_argument("control: need nt slots");
        for (auto& s : slots_) {
            if (s.size() != grid_.size()) throw std::invalid_argument("control: slot size mismatch");
            project(measure, s);
        }
    }

    /// Control whose slot j is the transform of fields[j].
    static Control from_fields(const SpectralMeasure& measure, const std::vector<Field>& fields) {
        std::vector<Spectrum> slots;
        slots.reserve(fields.size());
        for (const auto& f : fields) slots.push_back(forward_transform(f));
        return Control(measure, std::move(slots));
    }

    static Control constant(const SpectralMeasure& measure, const Field& field) {
        return from_fields(measure, std::vector<Field>(static_cast<std::size_t>(measure.grid().nt()), field));
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t slot_count() const noexcept { return slots_.size(); }
    [[nodiscard]] const Spectrum& slot(std::size_t j) const { return slots_.at(j); }
    [[nodiscard]] Spectrum& slot(std::size_t j) { return slots_.at(j); }

    [[nodiscard]] Field physical(std::size_t j) const { return inverse_transform(grid_, slots_.at(j)); }

    [[nodiscard]] bool is_zero() const noexcept {
        for (const auto& s : slots_)
            for (const auto& c : s)
                if (c != cplx{}) return false;
        return true;
    }

    /// a * this + other
    [[nodiscard]] Control axpy(double a, const Control& other) const {
        if (!(other.grid_ == grid_)) throw std::invalid_argument("control: grid mismatch");
        Control out(*this);
        for (std::size_t j = 0; j < slots_.size(); ++j)
            for (std::size_t i = 0; i < grid_.size(); ++i) out.slots_[j][i] = a * slots_[j][i] + other.slots_[j][i];
        return out;
    }

    [[nodiscard]] Control scaled(double a) const {
        Control out(*this);
        for (auto& s : out.slots_)
            for (auto& c : s) c *= a;
        return out;
    }

private:
    static void project(const SpectralMeasure& measure, Spectrum& s) {
        for (std::size_t i = 0; i < s.size(); ++i)
            if (measure[i] == 0.0) s[i] = 0.0;
    }

    Grid grid_;
    std::vector<Spectrum> slots_;
};

/// <h, g>_{H_T} = dt * sum_slots <h_j, g_j>_H.
inline double ht_inner(const Control& h, const Control& g, const SpectralMeasure& measure) {
    if (!(h.grid() == measure.grid()) || !(g.grid() == measure.grid()))
        throw std::invalid_argument("ht_inner: grid mismatch");
    KahanSum acc;
    for (std::size_t j = 0; j < h.slot_count(); ++j) acc.add(h_inner_spectral(h.slot(j), g.slot(j), measure));
    return measure.grid().dt() * acc.value();
}

/// Squared H_T norm.
inline double ht_norm_sq(const Control& h, const SpectralMeasure& measure) { return ht_inner(h, h, measure); }

inline double ht_norm(const Control& h, const SpectralMeasure& measure) { return std::sqrt(ht_norm_sq(h, measure)); }

/// Space-time test function: one physical field per time slot.
struct TestFunction {
    std::vector<Field> slots;

    static TestFunction constant(const Field& f, int nt) {
        return {std::vector<Field>(static_cast<std::size_t>(nt), f)};
    }
};

struct CovarianceRow {
    std::size_t pair_id = 0;
    double mc = 0.0;
    double std_error = 0.0;
    double analytic = 0.0;
    double rel_err = 0.0;
    bool pass = false;
};

struct CovarianceReport {
    std::size_t n_samples = 0;
    std::vector<CovarianceRow> rows;

    [[nodiscard]] bool all_pass() const noexcept {
        return std::all_of(rows.begin(), rows.end(), [](const CovarianceRow& r) { return r.pass; });
    }
};

/// Monte Carlo check of E[F(phi)F(psi)] = dt * sum_j <phi_j, psi_j>_H. A pair
/// passes when the estimate lies within 4 standard errors of the analytic value.
inline CovarianceReport covariance_check(const CovarianceSpec& spec, const Grid& grid, std::size_t n_samples,
                                         const std::vector<std::pair<TestFunction, TestFunction>>& pairs,
                                         std::uint64_t seed, unsigned workers = 1) {
    if (n_samples < 1000) throw std::invalid_argument("covariance_check: insufficient samples (need >= 1000)");
    const auto measure = spectral_density(spec, grid);
    const std::size_t nt = static_cast<std::size_t>(grid.nt());
    for (const auto& [a, b] : pairs)
        if (a.slots.size() != nt || b.slots.size() != nt)
            throw std::invalid_argument("covariance_check: test functions need nt slots");

    const double inv_n = 1.0 / static_cast<double>(grid.size());
    std::vector<std::vector<double>> products(pairs.size(), std::vector<double>(n_samples));
    parallel_for(n_samples, workers, [&](std::size_t s) {
        Transformer tr(grid);
        Spectrum w_hat(grid.size());
        std::vector<double> w(grid.size());
        std::vector<double> fa(pairs.size(), 0.0), fb(pairs.size(), 0.0);
        for (std::size_t j = 0; j < nt; ++j) {
            sample_noise_spectrum(measure, grid.dt(),
                                  CounterRng({seed, s, static_cast<std::uint32_t>(j), streams::covariance_check}),
                                  w_hat);
            tr.inverse(w_hat, w);
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                const auto& phi = pairs[p].first.slots[j];
                const auto& psi = pairs[p].second.slots[j];
                double sa = 0.0, sb = 0.0;
                for (std::size_t x = 0; x < w.size(); ++x) {
                    sa += phi[x] * w[x];
                    sb += psi[x] * w[x];
                }
                fa[p] += sa * inv_n;
                fb[p] += sb * inv_n;
            }
        }
        for (std::size_t p = 0; p < pairs.size(); ++p) products[p][s] = fa[p] * fb[p];
    });

    CovarianceReport report;
    report.n_samples = n_samples;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        KahanSum analytic;
        for (std::size_t j = 0; j < nt; ++j)
            analytic.add(h_inner(pairs[p].first.slots[j], pairs[p].second.slots[j], measure));
        CovarianceRow row;
        row.pair_id = p;
        const auto est = jackknife_mean(products[p]);
        row.mc = est.mean;
        row.std_error = est.std_error;
        row.analytic = grid.dt() * analytic.value();
        const double diff = std::abs(row.mc - row.analytic);
        row.rel_err = row.analytic != 0.0 ? diff / std::abs(row.analytic) : diff;
        row.pass = diff <= 4.0 * row.std_error;
        report.rows.push_back(row);
    }
    return report;
}

struct ModeVarianceReport {
    std::size_t n_samples = 0;
    /// Empirical E|W(k)|^2 per spectral slot, and the target dt*mu(k).
    std::vector<double> empirical;
    std::vector<double> expected;
    struct Correlation {
        std::size_t a = 0, b = 0;
        double mean = 0.0;      // E[Re(W(a) conj W(b))]
        double std_error = 0.0;
    };
    std::vector<Correlation> correlations;
};

/// Samples physical increments, transforms them back and accumulates per-mode
/// second moments plus cross moments for the requested slot pairs. Samples are
/// accumulated in fixed chunks so the result is independent of `workers`.
inline ModeVarianceReport mode_variance_check(const SpectralMeasure& measure, double dt, std::size_t n_samples,
                                              const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                              std::uint64_t seed, unsigned workers = 1, std::uint32_t step = 0) {
    const Grid& grid = measure.grid();
    constexpr std::size_t chunk = 256;
    const std::size_t n_chunks = (n_samples + chunk - 1) / chunk;
    struct Partial {
        std::vector<double> second;
        std::vector<double> cross, cross_sq;
    };
    std::vector<Partial> partials(n_chunks);
    parallel_for(n_chunks, workers, [&](std::size_t c) {
        Transformer tr(grid);
        Spectrum w_hat(grid.size()), back(grid.size());
        std::vector<double> w(grid.size());
        std::vector<KahanSum> second(grid.size());
        std::vector<KahanSum> cross(pairs.size()), cross_sq(pairs.size());
        const std::size_t end = std::min(n_samples, (c + 1) * chunk);
        for (std::size_t s = c * chunk; s < end; ++s) {
            sample_noise_spectrum(measure, dt, CounterRng({seed, s, step, streams::mode_check}), w_hat);
            tr.inverse(w_hat, w);
            tr.forward(w, back);
            for (std::size_t i = 0; i < grid.size(); ++i) second[i].add(std::norm(back[i]));
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                const double v = (back[pairs[p].first] * std::conj(back[pairs[p].second])).real();
                cross[p].add(v);
                cross_sq[p].add(v * v);
            }
        }
        Partial part;
        for (auto& k : second) part.second.push_back(k.value());
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            part.cross.push_back(cross[p].value());
            part.cross_sq.push_back(cross_sq[p].value());
        }
        partials[c] = std::move(part);
    });

    ModeVarianceReport report;
    report.n_samples = n_samples;
    const double n = static_cast<double>(n_samples);
    report.empirical.assign(grid.size(), 0.0);
    report.expected.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        KahanSum acc;
        for (const auto& part : partials) acc.add(part.second[i]);
        report.empirical[i] = acc.value() / n;
        report.expected[i] = dt * measure[i];
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        KahanSum sum, sq;
        for (const auto& part : partials) {
            sum.add(part.cross[p]);
            sq.add(part.cross_sq[p]);
        }
        const double mean = sum.value() / n;
        const double var = std::max(0.0, sq.value() / n - mean * mean);
        report.correlations.push_back({pairs[p].first, pairs[p].second, mean, std::sqrt(var / (n - 1.0))});
    }
    return report;
}

} // namespace stowave

#endif
