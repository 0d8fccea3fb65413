#ifndef STOWAVE_LATTICE_HPP
#define STOWAVE_LATTICE_HPP

// Periodic lattices, real fields and their spectral representation.
//
// Spectral normalization (used everywhere in the library):
//
//     forward:  c(k) = (1/N) * sum_x u(x) exp(-2 pi i k.x / n)
//     inverse:  u(x) =         sum_k c(k) exp(+2 pi i k.x / n)
//
// with N = n^dim lattice points. Parseval then reads
//
//     sum_x |u(x)|^2 = N * sum_k |c(k)|^2.
//
// Modes are stored in FFT order: along each axis index i carries wavenumber
// i for i < n/2 and i - n otherwise, so the Nyquist index n/2 carries -n/2.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <fftw3.h>

namespace stowave {

using cplx = std::complex<double>;
using Spectrum = std::vector<cplx>;

/// Periodic space-time lattice. Cheap to copy; derived per-mode data is shared.
class Grid {
public:
    Grid(int dim, int n, double length, double dt, int nt) : dim_(dim), n_(n), length_(length), dt_(dt), nt_(nt) {
        if (dim != 1 && dim != 3)
            throw std::invalid_argument("grid: unsupported dimension " + std::to_string(dim) + " (expected 1 or 3)");
        if (n < 4 || (n & (n - 1)) != 0)
            throw std::invalid_argument("grid: n must be a power of two >= 4, got " + std::to_string(n));
        if (!(length > 0.0) || !std::isfinite(length)) throw std::invalid_argument("grid: L must be positive");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("grid: dt must be positive");
        if (nt < 1) throw std::invalid_argument("grid: nt must be >= 1");
        if (dt > length / n * (1.0 + 1e-12))
            throw std::invalid_argument("grid: dt must not exceed the spacing L/n");

        auto cache = std::make_shared<Cache>();
        const std::size_t total = size();
        cache->omega.resize(total);
        cache->conj.resize(total);
        for (std::size_t i = 0; i < total; ++i) {
            const auto k = wavevector(i);
            double k2 = 0.0;
            for (int a = 0; a < dim_; ++a) k2 += double(k[a]) * k[a];
            cache->omega[i] = 2.0 * std::numbers::pi * std::sqrt(k2) / length_;
            std::array<int, 3> idx{};
            for (int a = 0; a < dim_; ++a) idx[a] = (n_ - axis_index(i, a)) % n_;
            cache->conj[i] = flat(idx);
        }
        cache_ = std::move(cache);
    }

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] double length() const noexcept { return length_; }
    [[nodiscard]] double dt() const noexcept { return dt_; }
    [[nodiscard]] int nt() const noexcept { return nt_; }
    [[nodiscard]] double horizon() const noexcept { return dt_ * nt_; }
    [[nodiscard]] double spacing() const noexcept { return length_ / n_; }
    [[nodiscard]] std::size_t size() const noexcept {
        std::size_t s = 1;
        for (int a = 0; a < dim_; ++a) s *= static_cast<std::size_t>(n_);
        return s;
    }

    /// Index along axis a of flat (row-major, last axis fastest) index i.
    [[nodiscard]] int axis_index(std::size_t i, int a) const noexcept {
        std::size_t stride = 1;
        for (int b = dim_ - 1; b > a; --b) stride *= static_cast<std::size_t>(n_);
        return static_cast<int>((i / stride) % static_cast<std::size_t>(n_));
    }

    [[nodiscard]] std::size_t flat(const std::array<int, 3>& idx) const noexcept {
        std::size_t i = 0;
        for (int a = 0; a < dim_; ++a) i = i * static_cast<std::size_t>(n_) + static_cast<std::size_t>(idx[a]);
        return i;
    }

    /// Integer wavevector of spectral slot i (unused components are zero).
    [[nodiscard]] std::array<int, 3> wavevector(std::size_t i) const noexcept {
        std::array<int, 3> k{};
        for (int a = 0; a < dim_; ++a) {
            const int j = axis_index(i, a);
            k[a] = j < n_ / 2 ? j : j - n_;
        }
        return k;
    }

    /// Physical coordinates of lattice point i (x = index * L/n).
    [[nodiscard]] std::array<double, 3> coordinate(std::size_t i) const noexcept {
        std::array<double, 3> x{};
        for (int a = 0; a < dim_; ++a) x[a] = axis_index(i, a) * spacing();
        return x;
    }

    /// omega(k) = 2 pi |k| / L.
    [[nodiscard]] double omega(std::size_t i) const noexcept { return cache_->omega[i]; }
    [[nodiscard]] std::span<const double> omegas() const noexcept { return cache_->omega; }

    /// Slot holding the mode -k.
    [[nodiscard]] std::size_t conjugate(std::size_t i) const noexcept { return cache_->conj[i]; }

    friend bool operator==(const Grid& a, const Grid& b) noexcept {
        return a.dim_ == b.dim_ && a.n_ == b.n_ && a.length_ == b.length_ && a.dt_ == b.dt_ && a.nt_ == b.nt_;
    }

private:
    struct Cache {
        std::vector<double> omega;
        std::vector<std::size_t> conj;
    };

    int dim_;
    int n_;
    double length_;
    double dt_;
    int nt_;
    std::shared_ptr<const Cache> cache_;
};

inline Grid make_grid(int dim, int n, double length, double dt, int nt) { return Grid(dim, n, length, dt, nt); }

/// Real scalar field on a grid.
class Field {
public:
    explicit Field(Grid grid) : grid_(std::move(grid)), values_(grid_.size(), 0.0) {}

    Field(Grid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.size()) throw std::invalid_argument("field: size does not match grid");
        for (double v : values_)
            if (!std::isfinite(v)) throw std::invalid_argument("field: non-finite entry");
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double& operator[](std::size_t i) noexcept { return values_[i]; }

    [[nodiscard]] double max_abs() const noexcept {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    Grid grid_;
    std::vector<double> values_;
};

/// Frames 0..nt of a field; frame j lives at time j*dt.
class FieldPath {
public:
    FieldPath(Grid grid, std::vector<Field> frames) : grid_(std::move(grid)), frames_(std::move(frames)) {
        if (frames_.size() != static_cast<std::size_t>(grid_.nt()) + 1)
            throw std::invalid_argument("path: expected nt+1 frames");
        for (const auto& f : frames_)
            if (!(f.grid() == grid_)) throw std::invalid_argument("path: frames on different grids");
    }

    /// Path of nt+1 zero frames.
    explicit FieldPath(const Grid& grid)
        : FieldPath(grid, std::vector<Field>(static_cast<std::size_t>(grid.nt()) + 1, Field(grid))) {}

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t frame_count() const noexcept { return frames_.size(); }
    [[nodiscard]] const Field& frame(std::size_t j) const { return frames_.at(j); }
    [[nodiscard]] Field& frame(std::size_t j) { return frames_.at(j); }
    [[nodiscard]] const std::vector<Field>& frames() const noexcept { return frames_; }

private:
    Grid grid_;
    std::vector<Field> frames_;
};

namespace detail {

class FftPlans {
public:
    static fftw_plan get(int dim, int n, int sign) {
        static FftPlans instance;
        std::lock_guard lock(instance.mutex_);
        auto key = std::make_tuple(dim, n, sign);
        if (auto it = instance.plans_.find(key); it != instance.plans_.end()) return it->second;
        std::size_t total = 1;
        std::array<int, 3> dims{};
        for (int a = 0; a < dim; ++a) {
            dims[a] = n;
            total *= static_cast<std::size_t>(n);
        }
        std::vector<cplx> a(total), b(total);
        fftw_plan plan = fftw_plan_dft(dim, dims.data(), reinterpret_cast<fftw_complex*>(a.data()),
                                       reinterpret_cast<fftw_complex*>(b.data()), sign,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (plan == nullptr) throw std::runtime_error("fftw: plan creation failed");
        instance.plans_.emplace(key, plan);
        return plan;
    }

    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;

private:
    FftPlans() = default;
    ~FftPlans() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    std::mutex mutex_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

} // namespace detail

/// Per-caller transform workspace. Not shareable between threads; create one
/// per trajectory.
class Transformer {
public:
    explicit Transformer(Grid grid)
        : grid_(std::move(grid)),
          scratch_in_(grid_.size()),
          scratch_out_(grid_.size()),
          forward_(detail::FftPlans::get(grid_.dim(), grid_.n(), FFTW_FORWARD)),
          backward_(detail::FftPlans::get(grid_.dim(), grid_.n(), FFTW_BACKWARD)) {}

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }

    /// Imaginary residue allowed in inverse transforms, relative to sum_k |c(k)|.
    static constexpr double imag_tolerance = 1e-12;

    void forward(std::span<const double> in, std::span<cplx> out) {
        check(in.size(), out.size());
        for (std::size_t i = 0; i < in.size(); ++i) scratch_in_[i] = cplx(in[i], 0.0);
        fftw_execute_dft(forward_, reinterpret_cast<fftw_complex*>(scratch_in_.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
        const double inv_n = 1.0 / static_cast<double>(in.size());
        for (auto& c : out) c *= inv_n;
    }

    /// Inverse transform of a Hermitian spectrum. Throws if the imaginary
    /// residue exceeds the tolerance; otherwise the residue is discarded.
    void inverse(std::span<const cplx> in, std::span<double> out) {
        check(out.size(), in.size());
        std::copy(in.begin(), in.end(), scratch_in_.begin());
        fftw_execute_dft(backward_, reinterpret_cast<fftw_complex*>(scratch_in_.data()),
                         reinterpret_cast<fftw_complex*>(scratch_out_.data()));
        double scale = 0.0;
        for (const auto& c : in) scale += std::abs(c);
        double residue = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = scratch_out_[i].real();
            residue = std::max(residue, std::abs(scratch_out_[i].imag()));
        }
        if (residue > imag_tolerance * scale)
            throw std::runtime_error("inverse transform: spectrum is not Hermitian (imaginary residue " +
                                     std::to_string(residue) + ")");
    }

private:
    void check(std::size_t phys, std::size_t spec) const {
        if (phys != grid_.size() || spec != grid_.size()) throw std::invalid_argument("transform: size mismatch");
    }

    Grid grid_;
    std::vector<cplx> scratch_in_;
    std::vector<cplx> scratch_out_;
    fftw_plan forward_;
    fftw_plan backward_;
};

inline Spectrum forward_transform(const Field& field) {
    Transformer tr(field.grid());
    Spectrum out(field.size());
    tr.forward(field.values(), out);
    return out;
}

inline Field inverse_transform(const Grid& grid, std::span<const cplx> coefficients) {
    if (coefficients.size() != grid.size()) throw std::invalid_argument("transform: size mismatch");
    Transformer tr(grid);
    std::vector<double> values(grid.size());
    tr.inverse(coefficients, values);
    return Field(grid, std::move(values));
}

/// Symmetrizes c so that c(-k) = conj(c(k)); self-conjugate slots keep their real part.
inline void hermitize(const Grid& grid, std::span<cplx> c) {
    for (std::size_t i = 0; i < c.size(); ++i) {
        const std::size_t j = grid.conjugate(i);
        if (j == i) {
            c[i] = cplx(c[i].real(), 0.0);
        } else if (i < j) {
            const cplx avg = 0.5 * (c[i] + std::conj(c[j]));
            c[i] = avg;
            c[j] = std::conj(avg);
        }
    }
}

/// max over frames 0..t_index and all lattice points of |value|.
inline double sup_norm_path(const FieldPath& path, std::size_t t_index) {
    if (t_index >= path.frame_count()) throw std::out_of_range("sup_norm_path: time index out of range");
    double m = 0.0;
    for (std::size_t j = 0; j <= t_index; ++j) m = std::max(m, path.frame(j).max_abs());
    return m;
}

/// Space-time observation box: half-open spatial index ranges [lo, hi) per
/// axis and an inclusive frame range [t_lo, t_hi].
struct Window {
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{1, 1, 1};
    int t_lo = 0;
    int t_hi = 0;

    [[nodiscard]] bool empty(int dim) const noexcept {
        for (int a = 0; a < dim; ++a)
            if (hi[a] <= lo[a]) return true;
        return t_hi < t_lo;
    }

    [[nodiscard]] bool contains(const Window& inner, int dim) const noexcept {
        for (int a = 0; a < dim; ++a)
            if (inner.lo[a] < lo[a] || inner.hi[a] > hi[a]) return false;
        return inner.t_lo >= t_lo && inner.t_hi <= t_hi;
    }
};

/// Centered sub-box of half the side length, over the full time range.
inline Window default_window(const Grid& grid) {
    Window w;
    for (int a = 0; a < grid.dim(); ++a) {
        w.lo[a] = grid.n() / 4;
        w.hi[a] = 3 * grid.n() / 4;
    }
    w.t_lo = 0;
    w.t_hi = grid.nt();
    return w;
}

inline Window full_window(const Grid& grid) {
    Window w;
    for (int a = 0; a < grid.dim(); ++a) {
        w.lo[a] = 0;
        w.hi[a] = grid.n();
    }
    w.t_lo = 0;
    w.t_hi = grid.nt();
    return w;
}

enum class HolderMode { dyadic, exhaustive };

namespace detail {

inline void check_window(const Grid& grid, const Window& w) {
    if (w.empty(grid.dim())) throw std::invalid_argument("holder: empty window");
    for (int a = 0; a < grid.dim(); ++a)
        if (w.lo[a] < 0 || w.hi[a] > grid.n()) throw std::invalid_argument("holder: window exceeds grid");
    if (w.t_lo < 0 || w.t_hi > grid.nt()) throw std::invalid_argument("holder: window exceeds time range");
}

inline std::vector<std::size_t> window_points(const Grid& grid, const Window& w) {
    std::vector<std::size_t> pts;
    std::array<int, 3> idx{};
    const int d = grid.dim();
    const int i1_hi = d == 3 ? w.hi[1] : 1, i1_lo = d == 3 ? w.lo[1] : 0;
    const int i2_hi = d == 3 ? w.hi[2] : 1, i2_lo = d == 3 ? w.lo[2] : 0;
    for (idx[0] = w.lo[0]; idx[0] < w.hi[0]; ++idx[0])
        for (idx[1] = i1_lo; idx[1] < i1_hi; ++idx[1])
            for (idx[2] = i2_lo; idx[2] < i2_hi; ++idx[2]) pts.push_back(grid.flat(idx));
    return pts;
}

} // namespace detail

/// Discrete Hoelder seminorm sup |g(t,x) - g(s,y)| / (|t-s| + |x-y|)^alpha over
/// pairs inside the window. The dyadic mode restricts pairs to time offsets
/// {0,1,2,4,...} steps combined with spatial offsets {0,+-1,+-2,+-4,...} along
/// one axis; the exhaustive mode visits every pair and is meant for small grids.
inline double holder_seminorm(const FieldPath& path, double alpha, const Window& window,
                              HolderMode mode = HolderMode::dyadic) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("holder: alpha must lie in (0, 1]");
    const Grid& grid = path.grid();
    detail::check_window(grid, window);
    const double dt = grid.dt();
    const double dx = grid.spacing();
    double best = 0.0;

    if (mode == HolderMode::exhaustive) {
        const auto pts = detail::window_points(grid, window);
        for (int t = window.t_lo; t <= window.t_hi; ++t) {
            const Field& ft = path.frame(t);
            for (int s = t; s <= window.t_hi; ++s) {
                const Field& fs = path.frame(s);
                for (std::size_t p = 0; p < pts.size(); ++p) {
                    const auto xp = grid.coordinate(pts[p]);
                    for (std::size_t q = (s == t ? p + 1 : 0); q < pts.size(); ++q) {
                        const auto xq = grid.coordinate(pts[q]);
                        double r2 = 0.0;
                        for (int a = 0; a < grid.dim(); ++a) r2 += (xp[a] - xq[a]) * (xp[a] - xq[a]);
                        const double d = (s - t) * dt + std::sqrt(r2);
                        best = std::max(best, std::abs(ft[pts[p]] - fs[pts[q]]) / std::pow(d, alpha));
                    }
                }
            }
        }
        return best;
    }

    std::vector<int> time_offsets{0};
    for (int k = 1; k <= window.t_hi - window.t_lo; k *= 2) time_offsets.push_back(k);
    int max_extent = 0;
    for (int a = 0; a < grid.dim(); ++a) max_extent = std::max(max_extent, window.hi[a] - window.lo[a] - 1);
    std::vector<int> space_offsets{0};
    for (int k = 1; k <= max_extent; k *= 2) {
        space_offsets.push_back(k);
        space_offsets.push_back(-k);
    }

    const auto pts = detail::window_points(grid, window);
    for (int t = window.t_lo; t <= window.t_hi; ++t) {
        const Field& ft = path.frame(t);
        for (int dtau : time_offsets) {
            if (t + dtau > window.t_hi) continue;
            const Field& fs = path.frame(t + dtau);
            for (int axis = 0; axis < grid.dim(); ++axis) {
                for (int dl : space_offsets) {
                    if (dtau == 0 && dl <= 0) continue;
                    if (dl == 0 && axis > 0) continue;
                    const double d = dtau * dt + std::abs(dl) * dx;
                    const double denom = std::pow(d, alpha);
                    for (std::size_t p : pts) {
                        const int j = grid.axis_index(p, axis) + dl;
                        if (j < window.lo[axis] || j >= window.hi[axis]) continue;
                        std::array<int, 3> idx{};
                        for (int a = 0; a < grid.dim(); ++a) idx[a] = grid.axis_index(p, a);
                        idx[axis] = j;
                        const std::size_t q = grid.flat(idx);
                        best = std::max(best, std::abs(ft[p] - fs[q]) / denom);
                    }
                }
            }
        }
    }
    return best;
}

} // namespace stowave

#endif
