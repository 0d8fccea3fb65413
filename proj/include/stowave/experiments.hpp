#ifndef STOWAVE_EXPERIMENTS_HPP
#define STOWAVE_EXPERIMENTS_HPP

// The seven runnable experiments. Each composes module operations, writes
// CSV rows and a JSON summary through an OutputDir, and never reads the
// clock or the worker count into its outputs, so results are byte-stable.
// Column layouts are documented in docs/output_schema.md.

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"
#include "lattice_io.hpp"
#include "manifest.hpp"
#include "ratefn.hpp"

namespace stowave {

struct ExperimentInfo {
    const char* name;
    const char* description;
    const char* anchor;
};

/// Stable listing; the anchor names the mathematical statement each run probes.
inline const std::vector<ExperimentInfo>& experiment_catalog() {
    static const std::vector<ExperimentInfo> list{
        {"simulate", "one trajectory of u^eps: sup-norm trace, final field, optional path dump",
         "mild solution of the stochastic wave equation"},
        {"clt", "coupled Monte Carlo moments over an eps grid and the fitted log-log slope",
         "central limit rates: E|u^eps - u0|^p and E|Y^eps - Y|^p of order eps^(p/2)"},
        {"mdp-rate", "least-norm rate function I(g) for point, terminal or full-path targets",
         "moderate deviation rate I(g) = inf{ |h|^2/2 : Z^h = g }"},
        {"mdp-tail", "Monte Carlo tail probability of Z^eps at a probe, normalized by h(eps)^2",
         "moderate deviations at speed h(eps)^2"},
        {"noise-check", "per-mode variance and cross-mode correlation of the sampled noise",
         "covariance functional of the spatially correlated noise"},
        {"holder", "increment moments over dyadic separations and the fitted Hoelder exponent",
         "Hoelder regularity of the solution in time and space"},
        {"weak-continuity", "Z^h under oscillating control perturbations sin(2^j pi t / T) g",
         "continuity of h -> Z^h in the weak topology"},
    };
    return list;
}

namespace detail {

inline json summary_header(const RunConfig& cfg) {
    return {{"schema_version", schema_version},
            {"tool_version", tool_version},
            {"config_hash", cfg.hash},
            {"seed", cfg.seed},
            {"experiment", cfg.experiment}};
}

/// cos(2 pi m x_0 / L) scaled by amp, the standard smooth spatial profile.
inline Field cosine_profile(const Grid& grid, double mode, double amp) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = amp * std::cos(2.0 * std::numbers::pi * mode * grid.coordinate(i)[0] / grid.length());
    return Field(grid, v);
}

inline Probe read_probe(Reader& r, const Grid& grid) {
    Probe probe{grid.nt(), grid.size() / 2};
    if (r.has("probe")) {
        auto p = r.child("probe");
        probe.t_index = static_cast<int>(p.integer("t_index", grid.nt()));
        const auto x = p.integer("x_index", static_cast<std::int64_t>(grid.size() / 2));
        if (x < 0 || static_cast<std::size_t>(x) >= grid.size()) p.fail("x_index", "outside the grid");
        probe.x_index = static_cast<std::size_t>(x);
        if (probe.t_index < 1 || probe.t_index > grid.nt()) p.fail("t_index", "must lie in 1..nt");
        p.finish();
    }
    return probe;
}

inline std::size_t read_count(Reader& r, const std::string& key, std::int64_t fallback, std::int64_t minimum) {
    const auto n = r.integer(key, fallback);
    if (n < minimum) r.fail(key, "must be at least " + std::to_string(minimum));
    return static_cast<std::size_t>(n);
}

} // namespace detail

inline void run_simulate(const RunConfig& cfg, const Model& m, OutputDir& out) {
    Reader p(cfg.experiment_params, "experiment.params");
    const double eps = p.number("eps", 0.01);
    if (!(eps >= 0.0)) p.fail("eps", "must be non-negative");
    const auto sample = static_cast<std::uint64_t>(detail::read_count(p, "sample", 0, 0));
    const bool dump = p.boolean("dump_path", false);
    p.finish();

    const auto u0 = solve_deterministic(m);
    const auto u = eps > 0.0 ? solve_spde(m, eps, NoisePath::generated(cfg.seed, sample)) : u0;
    std::ostringstream trace, final_csv;
    write_trace_csv(trace, u);
    write_field_csv(final_csv, u.frame(u.frame_count() - 1));
    out.write("trace.csv", trace.str());
    out.write("final.csv", final_csv.str());
    if (dump) {
        std::ostringstream bin(std::ios::binary);
        for (std::size_t j = 0; j < u.frame_count(); ++j) write_field_binary(bin, u.frame(j), j);
        out.write("path.bin", bin.str());
    }
    auto s = detail::summary_header(cfg);
    s["eps"] = eps;
    s["sample"] = sample;
    s["sup_norm"] = jnum(sup_norm(u));
    s["sup_distance_to_u0"] = jnum(sup_distance(u, u0));
    s["mild_residual_u0"] = jnum(mild_residual(m, u0));
    s["warnings"] = m.warnings;
    out.write_json("summary.json", s);
}

inline void run_clt(const RunConfig& cfg, const Model& m, OutputDir& out) {
    Reader p(cfg.experiment_params, "experiment.params");
    Quantity q{};
    try {
        q = parse_quantity(p.string("quantity", "sup_diff"));
    } catch (const std::invalid_argument& e) {
        p.fail("quantity", e.what());
    }
    const double power = p.number("p", 2.0);
    std::vector<double> eps;
    if (p.has("eps")) {
        eps = p.numbers("eps");
    } else {
        for (int k = 4; k <= 10; ++k) eps.push_back(std::ldexp(1.0, -k));
    }
    const std::size_t n = detail::read_count(p, "samples", 400, 16);
    const Probe probe = detail::read_probe(p, m.grid);
    p.finish();

    const auto u0 = solve_deterministic(m);
    std::vector<MCResult> results;
    std::ostringstream csv;
    csv << "eps,estimate,std_error,n_samples,p\n";
    for (double e : eps) {
        if (!(e > 0.0)) throw ConfigError("config: field 'experiment.params.eps': values must be positive");
        auto r = mc_moment(m, u0, e, power, n, q, cfg.seed, cfg.workers, probe);
        csv << fmt(e) << ',' << fmt(r.estimate) << ',' << fmt(r.std_error) << ',' << r.n_samples << ','
            << fmt(power) << '\n';
        results.push_back(r);
    }
    out.write("moments.csv", csv.str());

    auto s = detail::summary_header(cfg);
    s["quantity"] = quantity_name(q);
    s["p"] = power;
    s["samples"] = n;
    s["expected_slope"] = power / 2.0;
    try {
        const auto fit = fit_rate(results);
        s["slope"] = jnum(fit.slope);
        s["slope_std_error"] = jnum(fit.slope_std_error);
        s["intercept"] = jnum(fit.intercept);
        s["r_squared"] = jnum(fit.r_squared);
        s["dropped_eps"] = fit.dropped;
        s["fit_error"] = nullptr;
    } catch (const std::invalid_argument& e) {
        s["slope"] = nullptr;
        s["fit_error"] = e.what();
    }
    out.write_json("ratefit.json", s);
}

inline TargetSpec read_target(Reader& p, const Model& m) {
    auto t = p.child("target");
    const auto kind = t.string("kind");
    TargetSpec target;
    if (kind == "point") {
        const int ti = static_cast<int>(t.integer("t_index", m.grid.nt()));
        const auto xi = t.integer("x_index", static_cast<std::int64_t>(m.grid.size() / 2));
        if (ti < 1 || ti > m.grid.nt()) t.fail("t_index", "must lie in 1..nt");
        if (xi < 0 || static_cast<std::size_t>(xi) >= m.grid.size()) t.fail("x_index", "outside the grid");
        target = TargetSpec::point(ti, static_cast<std::size_t>(xi), t.number("value"));
    } else if (kind == "terminal") {
        target = TargetSpec::terminal_field(
            detail::cosine_profile(m.grid, t.number("mode", 1.0), t.number("amplitude", 1.0)));
    } else if (kind == "path") {
        const auto profile = detail::cosine_profile(m.grid, t.number("mode", 1.0), t.number("amplitude", 1.0));
        FieldPath g(m.grid);
        for (std::size_t j = 0; j < g.frame_count(); ++j) {
            const double ramp = static_cast<double>(j) / m.grid.nt();
            auto dst = g.frame(j).values();
            for (std::size_t x = 0; x < dst.size(); ++x) dst[x] = ramp * profile[x];
        }
        target = TargetSpec::full_path(std::move(g));
    } else {
        t.fail("kind", "expected \"point\", \"terminal\" or \"path\"");
    }
    t.finish();
    return target;
}

inline void run_mdp_rate(const RunConfig& cfg, const Model& m, OutputDir& out) {
    Reader p(cfg.experiment_params, "experiment.params");
    const auto target = read_target(p, m);
    const std::vector<double> scales = p.has("scales") ? p.numbers("scales") : std::vector<double>{1.0};
    const double tol = p.number("tol", 1e-8);
    if (!(tol > 0.0)) p.fail("tol", "must be positive");
    const bool dump = p.boolean("dump_minimizer", false);
    p.finish();

    const auto u0 = solve_deterministic(m);
    std::ostringstream csv;
    csv << "scale,value,residual,iterations,feasible\n";
    json rows = json::array();
    std::optional<RateResult> first;
    for (double c : scales) {
        const auto r = rate_function(m, u0, target.scaled(c), tol);
        csv << fmt(c) << ',' << fmt(r.value) << ',' << fmt(r.residual) << ',' << r.iterations << ','
            << (r.feasible ? 1 : 0) << '\n';
        rows.push_back({{"scale", c},
                        {"value", jnum(r.value)},
                        {"residual", jnum(r.residual)},
                        {"iterations", r.iterations},
                        {"feasible", r.feasible},
                        {"note", r.note}});
        if (!first) first = r;
    }
    out.write("rate.csv", csv.str());
    if (dump) {
        std::ostringstream bin(std::ios::binary);
        for (std::size_t j = 0; j < first->minimizer.slot_count(); ++j)
            write_field_binary(bin, first->minimizer.physical(j), j);
        out.write("minimizer.bin", bin.str());
    }
    auto s = detail::summary_header(cfg);
    s["tol"] = tol;
    s["results"] = rows;
    if (target.kind == TargetSpec::Kind::point_constraint && m.coeffs.sigma_constant && m.coeffs.b_affine) {
        const double oracle = gaussian_point_rate(m, target.t_index, target.x_index, target.value * scales.front());
        s["gaussian_rate"] = oracle;
        s["oracle_rel_err"] = jnum(std::abs(first->value - oracle) / oracle);
    }
    out.write_json("rate.json", s);
}

inline void run_mdp_tail(const RunConfig& cfg, const Model& m, OutputDir& out) {
    Reader p(cfg.experiment_params, "experiment.params");
    const double eps = p.number("eps", 1e-4);
    if (!(eps > 0.0)) p.fail("eps", "must be positive");
    const std::size_t n = detail::read_count(p, "samples", 100000, 2);
    const Probe probe = detail::read_probe(p, m.grid);
    double r = 0.0;
    if (p.has("r")) {
        r = p.number("r");
        if (!(r >= 0.0)) p.fail("r", "must be non-negative");
    } else {
        const double count = p.number("expected_count", 200.0);
        if (!(count > 0.0 && count < static_cast<double>(n))) p.fail("expected_count", "must lie in (0, samples)");
        if (!(m.coeffs.sigma_constant && m.coeffs.b_affine))
            p.fail("expected_count", "needs constant sigma and affine b; give r instead");
        const double s = std::sqrt(gaussian_point_variance(m, probe.t_index));
        r = normal_isf(count / static_cast<double>(n) / 2.0) * s / m.scale.h(eps);
    }
    p.finish();

    const auto u0 = solve_deterministic(m);
    const auto t = tail_probability(m, u0, eps, r, n, probe, cfg.seed, cfg.workers);
    std::ostringstream csv;
    csv << "eps,theta,h,r,n_samples,exceedances,probability,std_error,upper_bound,normalized,closed_form,"
           "gaussian_rate,expected_count\n";
    csv << fmt(eps) << ',' << fmt(m.scale.theta) << ',' << fmt(t.h) << ',' << fmt(r) << ',' << t.n_samples << ','
        << t.exceedances << ',' << fmt(t.probability) << ',' << fmt(t.std_error) << ',' << (t.upper_bound ? 1 : 0)
        << ',' << fmt(t.normalized) << ',' << fmt(t.closed_form) << ',' << fmt(t.gaussian_rate) << ','
        << fmt(t.expected_count) << '\n';
    out.write("tail.csv", csv.str());

    auto s = detail::summary_header(cfg);
    s["eps"] = eps;
    s["theta"] = m.scale.theta;
    s["r"] = r;
    s["probe"] = {{"t_index", probe.t_index}, {"x_index", probe.x_index}};
    s["probability"] = jnum(t.probability);
    s["std_error"] = jnum(t.std_error);
    s["exceedances"] = t.exceedances;
    s["upper_bound"] = t.upper_bound;
    s["normalized"] = jnum(t.normalized);
    s["closed_form"] = jnum(t.closed_form);
    s["gaussian_rate"] = jnum(t.gaussian_rate);
    s["expected_count"] = jnum(t.expected_count);
    s["probability_rel_err"] = jnum(std::abs(t.probability / t.closed_form - 1.0));
    s["normalized_rel_gap"] = jnum(std::abs(t.normalized / t.gaussian_rate - 1.0));
    out.write_json("tail.json", s);
}

/// Correlation pairs spread over the checked modes, skipping a mode paired
/// with itself or its conjugate.
inline std::vector<std::pair<std::size_t, std::size_t>> correlation_pairs(const Grid& grid,
                                                                          const std::vector<std::size_t>& modes,
                                                                          std::size_t count) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const std::size_t k = modes.size();
    if (k < 2) return pairs;
    const std::size_t stride = std::max<std::size_t>(1, k / std::max<std::size_t>(1, count));
    for (std::size_t i = 0; i < k && pairs.size() < count; i += stride) {
        const std::size_t a = modes[i];
        const std::size_t b = modes[(i + k / 2 + 1) % k];
        if (a == b || grid.conjugate(a) == b) continue;
        pairs.emplace_back(a, b);
    }
    return pairs;
}

inline void run_noise_check(const RunConfig& cfg, const Model& m, OutputDir& out) {
    Reader p(cfg.experiment_params, "experiment.params");
    const std::size_t n = detail::read_count(p, "samples", 20000, 1000);
    const auto step = static_cast<std::uint32_t>(detail::read_count(p, "step", 0, 0));
    const double ratio = p.number("min_weight_ratio", 1e-3);
    const double tolerance = p.number("tolerance", 0.03);
    const std::size_t n_pairs = detail::read_count(p, "correlation_pairs", 64, 0);
    const double z_bound = p.number("z_bound", 4.0);
    p.finish();

    const Grid& g = m.grid;
    std::vector<std::size_t> checked;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (m.measure[i] > 0.0 && m.measure[i] >= ratio * m.measure.max()) checked.push_back(i);
    const auto pairs = correlation_pairs(g, checked, n_pairs);
    const auto rep = mode_variance_check(m.measure, g.dt(), n, pairs, cfg.seed, cfg.workers, step);

    std::ostringstream modes;
    modes << "slot,omega,expected,empirical,rel_err,checked\n";
    double max_rel = 0.0;
    std::size_t ci = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const bool is_checked = ci < checked.size() && checked[ci] == i;
        if (is_checked) ++ci;
        const double rel = rep.expected[i] > 0.0 ? std::abs(rep.empirical[i] / rep.expected[i] - 1.0)
                                                 : std::numeric_limits<double>::quiet_NaN();
        if (is_checked) max_rel = std::max(max_rel, rel);
        modes << i << ',' << fmt(g.omega(i)) << ',' << fmt(rep.expected[i]) << ',' << fmt(rep.empirical[i]) << ','
              << fmt(rel) << ',' << (is_checked ? 1 : 0) << '\n';
    }
    out.write("modes.csv", modes.str());

    std::ostringstream corr;
    corr << "a,b,mean,std_error,z\n";
    double max_z = 0.0;
    for (const auto& c : rep.correlations) {
        const double z = c.std_error > 0.0 ? std::abs(c.mean) / c.std_error : 0.0;
        max_z = std::max(max_z, z);
        corr << c.a << ',' << c.b << ',' << fmt(c.mean) << ',' << fmt(c.std_error) << ',' << fmt(z) << '\n';
    }
    out.write("correlations.csv", corr.str());

    auto s = detail::summary_header(cfg);
    s["samples"] = n;
    s["step"] = step;
    s["checked_modes"] = checked.size();
    s["max_rel_err"] = max_rel;
    s["tolerance"] = tolerance;
    s["variance_pass"] = max_rel <= tolerance;
    s["correlation_pairs"] = rep.correlations.size();
    s["max_abs_z"] = max_z;
    s["z_bound"] = z_bound;
    s["correlation_pass"] = max_z <= z_bound;
    s["pass"] = max_rel <= tolerance && max_z <= z_bound;
    out.write_json("noise.json", s);
}

inline void run_holder(const RunConfig& cfg, const Model& m, OutputDir& out) {
    Reader p(cfg.experiment_params, "experiment.params");
    const double eps = p.number("eps", 1.0);
    if (!(eps >= 0.0)) p.fail("eps", "must be non-negative");
    const double power = p.number("p", 4.0);
    const std::size_t n = detail::read_count(p, "samples", 200, 1);
    const auto axis_name = p.string("axis", "time");
    if (axis_name != "time" && axis_name != "space") p.fail("axis", "expected \"time\" or \"space\"");
    const auto axis = axis_name == "time" ? HolderAxis::time : HolderAxis::space;
    std::optional<Window> window;
    if (p.has("window")) {
        auto w = p.child("window");
        Window win = default_window(m.grid);
        const int lo = static_cast<int>(w.integer("lo", win.lo[0]));
        const int hi = static_cast<int>(w.integer("hi", win.hi[0]));
        for (int a = 0; a < m.grid.dim(); ++a) {
            win.lo[a] = lo;
            win.hi[a] = hi;
        }
        win.t_lo = static_cast<int>(w.integer("t_lo", win.t_lo));
        win.t_hi = static_cast<int>(w.integer("t_hi", win.t_hi));
        w.finish();
        window = win;
    }
    p.finish();

    const auto h = holder_estimate(m, eps, power, n, axis, cfg.seed, cfg.workers, window);
    std::ostringstream csv;
    csv << "separation,moment\n";
    for (std::size_t i = 0; i < h.separations.size(); ++i)
        csv << fmt(h.separations[i]) << ',' << fmt(h.moments[i]) << '\n';
    out.write("holder.csv", csv.str());

    auto s = detail::summary_header(cfg);
    s["eps"] = eps;
    s["p"] = power;
    s["samples"] = n;
    s["axis"] = axis_name;
    s["degenerate"] = h.degenerate;
    s["alpha"] = h.degenerate ? json(nullptr) : jnum(h.alpha);
    s["alpha_std_error"] = h.degenerate ? json(nullptr) : jnum(h.alpha_std_error);
    s["slope"] = h.degenerate ? json(nullptr) : jnum(h.slope);
    s["window"] = {{"lo", h.window.lo[0]}, {"hi", h.window.hi[0]}, {"t_lo", h.window.t_lo}, {"t_hi", h.window.t_hi}};
    out.write_json("holder.json", s);
}

inline void run_weak_continuity(const RunConfig& cfg, const Model& m, OutputDir& out) {
    Reader p(cfg.experiment_params, "experiment.params");
    std::vector<int> js;
    if (p.has("j_values")) {
        js = p.integers("j_values");
    } else {
        for (int j = 1; j <= 6; ++j) js.push_back(j);
    }
    const double tol = p.number("tolerance", 0.05);
    const double h_mode = p.number("control_mode", 1.0);
    const double h_amp = p.number("control_amplitude", 1.0);
    const double g_mode = p.number("perturbation_mode", 1.0);
    const double g_amp = p.number("perturbation_amplitude", 1.0);
    p.finish();

    const auto u0 = solve_deterministic(m);
    const auto h = Control::constant(m.measure, detail::cosine_profile(m.grid, h_mode, h_amp));
    const auto g = detail::cosine_profile(m.grid, g_mode, g_amp);
    const auto rep = weak_continuity_check(m, u0, h, g, js, tol);

    std::ostringstream csv;
    csv << "j,distance,ratio\n";
    for (std::size_t i = 0; i < rep.j_values.size(); ++i)
        csv << rep.j_values[i] << ',' << fmt(rep.distances[i]) << ',' << fmt(rep.distances[i] / rep.reference_sup)
            << '\n';
    out.write("weak.csv", csv.str());

    auto s = detail::summary_header(cfg);
    s["reference_sup"] = jnum(rep.reference_sup);
    s["tolerance_ratio"] = tol;
    s["tail_nonincreasing"] = rep.tail_nonincreasing;
    s["below_tolerance"] = rep.below_tolerance;
    s["pass"] = rep.pass();
    out.write_json("weak.json", s);
}

/// Output directory of a run: STOWAVE_OUTPUT_DIR when set, else the config's.
inline fs::path resolve_output_dir(const RunConfig& cfg) {
    if (const char* env = std::getenv("STOWAVE_OUTPUT_DIR"); env && *env) return env;
    return cfg.output_dir;
}

/// Validates, runs the named experiment and writes its manifest.
inline RunManifest run_experiment(const RunConfig& cfg, const fs::path& dir) {
    RunManifest manifest;
    manifest.config_hash = cfg.hash;
    manifest.seed = cfg.seed;
    manifest.experiment = cfg.experiment;
    manifest.config = cfg.document;
    manifest.started = utc_timestamp();
    const Model model = build_model(cfg);
    OutputDir out(dir);
    const auto& e = cfg.experiment;
    if (e == "simulate") run_simulate(cfg, model, out);
    else if (e == "clt") run_clt(cfg, model, out);
    else if (e == "mdp-rate") run_mdp_rate(cfg, model, out);
    else if (e == "mdp-tail") run_mdp_tail(cfg, model, out);
    else if (e == "noise-check") run_noise_check(cfg, model, out);
    else if (e == "holder") run_holder(cfg, model, out);
    else if (e == "weak-continuity") run_weak_continuity(cfg, model, out);
    else throw ConfigError("config: unknown experiment '" + e + "'");
    manifest.finished = utc_timestamp();
    out.write_manifest(manifest);
    manifest.files = out.files();
    return manifest;
}

} // namespace stowave

#endif
