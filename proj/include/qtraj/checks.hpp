#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qtraj/along_curve.hpp"
#include "qtraj/io.hpp"
#include "qtraj/scenario.hpp"

namespace qtraj {

// ---------------------------------------------------------------------------
// Fault injection: documented, deliberately small corruptions that every
// check must detect (non-vacuity).

enum class FaultKind { none, scale_snapshot, phase_kick, corrupt_dpsi_dt, flip_force_sign };

inline std::string to_string(FaultKind f) {
    switch (f) {
        case FaultKind::none: return "none";
        case FaultKind::scale_snapshot: return "scale_snapshot";
        case FaultKind::phase_kick: return "phase_kick";
        case FaultKind::corrupt_dpsi_dt: return "corrupt_dpsi_dt";
        case FaultKind::flip_force_sign: return "flip_force_sign";
    }
    return "?";
}

/// Corrupt the middle snapshot: amplitude scaled by 1.01, phase kicked by
/// 0.01 rad, or the stored time derivative scaled by 1.05.
inline void apply_fault(SnapshotHistory& h, FaultKind fault) {
    if (fault == FaultKind::none || fault == FaultKind::flip_force_sign) return;
    const std::size_t mid = h.size() / 2;
    const Complex factor = fault == FaultKind::scale_snapshot
                               ? Complex{1.01, 0.0}
                               : std::exp(Complex{0.0, 0.01});
    auto scale_field = [&](ComplexField& f) {
        for (auto& v : f.values) v *= factor;
    };
    std::visit(
        [&](auto& state) {
            using T = std::decay_t<decltype(state)>;
            if constexpr (std::is_same_v<T, ComplexField>) {
                scale_field(state);
            } else if constexpr (std::is_same_v<T, SpinorField>) {
                scale_field(state.up);
            } else {
                if (fault == FaultKind::corrupt_dpsi_dt) {
                    for (auto& v : state.dpsi_dt.values) v *= 1.05;
                } else {
                    scale_field(state.psi);
                    scale_field(state.dpsi_dt);
                }
            }
        },
        h.states[mid]);
}

// ---------------------------------------------------------------------------

struct CheckOptions {
    double tol_scale = 1.0;
    bool inject_documented_fault = false;
};

struct CheckResult {
    std::string name;
    double residual = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    bool skipped = false;
    std::string detail;
    double seconds = 0.0;

    bool ok() const { return passed || skipped; }
};

struct DiagnosticsReport {
    std::vector<CheckResult> entries;

    bool all_passed() const {
        for (const auto& e : entries)
            if (!e.ok()) return false;
        return !entries.empty();
    }
};

inline void write_report(const DiagnosticsReport& report, const std::filesystem::path& txt_path,
                         const std::filesystem::path& json_path) {
    {
        auto out = detail::open_for_write(txt_path);
        out << "check residual tolerance status\n";
        for (const auto& e : report.entries) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), " %.6e %.3e ", e.residual, e.tolerance);
            out << e.name << buf << (e.skipped ? "SKIP" : (e.passed ? "PASS" : "FAIL"))
                << "\n";
        }
    }
    {
        Json j;
        j["all_passed"] = report.all_passed();
        Json checks = Json::array();
        for (const auto& e : report.entries) {
            Json c;
            c["name"] = e.name;
            c["residual"] = e.residual;
            c["tolerance"] = e.tolerance;
            c["status"] = e.skipped ? "SKIP" : (e.passed ? "PASS" : "FAIL");
            c["detail"] = e.detail;
            checks.push_back(std::move(c));
        }
        j["checks"] = std::move(checks);
        auto out = detail::open_for_write(json_path);
        out << j.dump(2) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Bundled reference scenarios. The same definitions back the shipped
// scenario files; the registry uses them directly so `verify` is
// self-contained.

namespace ref {

inline UniformGrid grid() { return UniformGrid(-25.0, 25.0, 1024); }

inline Scenario free_gaussian() {
    Scenario s;
    s.name = "free_gaussian";
    s.grid = grid();
    s.initial_state.kind = InitialStateSpec::Kind::gaussian;
    s.initial_state.sigma0 = 1.0;
    s.dt = 2e-3;
    s.n_steps = 500;
    s.params.eps_node = 1e-4;
    s.trajectory_seeds = {{-1.5, 0}, {0.5, 0}, {1.8, 0}};
    return s;
}

inline Scenario free_gaussian_short() {
    Scenario s = free_gaussian();
    s.name = "free_gaussian_short";
    s.dt = 1e-3;
    s.n_steps = 50;
    return s;
}

inline Scenario norm_run() {
    Scenario s = free_gaussian();
    s.name = "norm_run";
    s.dt = 1e-3;
    s.n_steps = 1000;
    return s;
}

inline Scenario plane_wave() {
    Scenario s;
    s.name = "plane_wave";
    s.grid = grid();
    s.initial_state.kind = InitialStateSpec::Kind::plane_wave;
    s.initial_state.k = 2.0 * std::numbers::pi * 8.0 / s.grid.length();
    s.dt = 1e-3;
    s.n_steps = 300;
    s.trajectory_seeds = {{-4.0, 0}};
    return s;
}

inline Scenario harmonic_coherent() {
    Scenario s;
    s.name = "harmonic_coherent";
    s.grid = grid();
    s.params.potential = PotentialSpec::harmonic(1.0);
    s.params.eps_node = 1e-4;
    s.initial_state.kind = InitialStateSpec::Kind::gaussian;
    s.initial_state.x0 = 2.0;
    s.initial_state.sigma0 = std::sqrt(0.5); // hbar / (2 m omega)
    s.dt = 2e-3;
    s.n_steps = 500;
    s.trajectory_seeds = {{1.2, 0}, {2.0, 0}, {2.7, 0}};
    return s;
}

inline Scenario harmonic_ground() {
    Scenario s = harmonic_coherent();
    s.name = "harmonic_ground";
    s.initial_state.x0 = 0.0;
    s.dt = 1e-4;
    s.n_steps = 400;
    s.trajectory_seeds = {{0.4, 0}};
    return s;
}

inline Scenario mass_sine() {
    Scenario s;
    s.name = "mass_sine";
    s.grid = grid();
    s.params.model = ModelKind::nonconstant_mass;
    std::vector<double> m(s.grid.n);
    for (std::size_t i = 0; i < s.grid.n; ++i)
        m[i] = 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * (s.grid.x(i) - s.grid.x_min) /
                                    s.grid.length());
    s.params.mass_profile = MassSpec::tabulated(std::move(m));
    s.params.eps_node = 1e-4;
    s.initial_state.kind = InitialStateSpec::Kind::gaussian;
    s.initial_state.x0 = -5.0;
    s.initial_state.k0 = 0.8;
    s.initial_state.sigma0 = 1.5;
    s.dt = 1e-3;
    s.n_steps = 400;
    s.trajectory_seeds = {{-6.0, 0}, {-5.0, 0}, {-4.2, 0}};
    return s;
}

inline Scenario pauli_harmonic() {
    Scenario s;
    s.name = "pauli_harmonic";
    s.grid = grid();
    s.params.model = ModelKind::pauli;
    s.params.external_field =
        ExternalFieldSpec::uniform(PotentialSpec::harmonic(1.0), {0.5, 0.0, 0.0});
    s.params.eps_node = 1e-4;
    s.initial_state.kind = InitialStateSpec::Kind::spinor_gaussian;
    s.initial_state.amplitudes = {1.0, 1.0};
    s.initial_state.relative_phase = 0.0;
    s.initial_state.x0 = 2.0;
    s.initial_state.sigma0 = std::sqrt(0.5);
    s.dt = 2e-3;
    s.n_steps = 500;
    s.trajectory_seeds = {{1.5, 0}, {2.0, 0}, {2.5, 1}};
    return s;
}

inline Scenario pauli_coupled() {
    Scenario s;
    s.name = "pauli_coupled";
    s.grid = grid();
    s.params.model = ModelKind::pauli;
    s.params.external_field =
        ExternalFieldSpec::uniform(PotentialSpec::zero(), {2.0, 0.0, 0.0});
    s.params.eps_node = 1e-4;
    s.initial_state.kind = InitialStateSpec::Kind::spinor_gaussian;
    s.initial_state.amplitudes = {1.0, 1.0};
    s.initial_state.relative_phase = 0.5 * std::numbers::pi;
    s.initial_state.sigma0 = 1.5;
    s.dt = 1e-3;
    s.n_steps = 300;
    s.trajectory_seeds = {{0.5, 0}};
    return s;
}

inline Scenario free_gaussian_newton() {
    Scenario s = free_gaussian();
    s.name = "free_gaussian_newton";
    s.dt = 8e-3;
    s.n_steps = 125;
    return s;
}

inline Scenario mass_sine_newton() {
    Scenario s = mass_sine();
    s.name = "mass_sine_newton";
    s.params.potential = PotentialSpec::harmonic(1.0, -3.0);
    s.initial_state.k0 = 1.2;
    s.initial_state.sigma0 = 1.0;
    s.dt = 8e-3;
    s.n_steps = 125;
    return s;
}

inline Scenario kg_gaussian() {
    Scenario s;
    s.name = "kg_gaussian";
    s.grid = grid();
    s.params.model = ModelKind::klein_gordon;
    s.params.eps_node = 1e-4;
    s.initial_state.kind = InitialStateSpec::Kind::kg_gaussian;
    s.initial_state.k0 = 0.5;
    s.initial_state.sigma0 = 2.0;
    s.dt = 2e-3;
    s.n_steps = 500;
    s.trajectory_seeds = {{-1.0, 0}, {0.0, 0}, {1.5, 0}};
    return s;
}

inline Scenario kg_newton() {
    Scenario s = kg_gaussian();
    s.name = "kg_newton";
    s.initial_state.sigma0 = 1.2;
    s.initial_state.k0 = 0.8;
    s.dt = 8e-3;
    s.n_steps = 125;
    return s;
}

inline Scenario kg_plane_wave() {
    Scenario s;
    s.name = "kg_plane_wave";
    s.grid = grid();
    s.params.model = ModelKind::klein_gordon;
    s.initial_state.kind = InitialStateSpec::Kind::plane_wave;
    s.initial_state.k = 2.0 * std::numbers::pi * 12.0 / s.grid.length();
    s.dt = 1e-3;
    s.n_steps = 200;
    s.trajectory_seeds = {{0.0, 0}};
    return s;
}

inline Scenario weyl_massless() {
    Scenario s;
    s.name = "weyl_massless";
    s.grid = grid();
    s.params.model = ModelKind::weyl;
    s.params.constants.mass = 0.0;
    s.params.weyl_family = WeylFamily::per_component;
    s.params.eps_node = 1e-4;
    s.initial_state.kind = InitialStateSpec::Kind::spinor_gaussian;
    s.initial_state.amplitudes = {1.0, 1.0};
    s.initial_state.k0 = 0.8;
    s.initial_state.sigma0 = 2.0;
    s.dt = s.grid.dx(); // curves move at +-c: keep sampling grid-commensurate
    s.n_steps = 100;
    s.trajectory_seeds = {{0.5, 0}, {0.5, 1}};
    return s;
}

inline Scenario weyl_gaussian() {
    Scenario s;
    s.name = "weyl_gaussian";
    s.grid = grid();
    s.params.model = ModelKind::weyl;
    s.params.weyl_family = WeylFamily::full_system;
    s.params.eps_node = 1e-4;
    s.initial_state.kind = InitialStateSpec::Kind::spinor_gaussian;
    s.initial_state.amplitudes = {0.8, 0.6};
    s.initial_state.relative_phase = 0.5;
    s.initial_state.k0 = 0.5;
    s.initial_state.sigma0 = 2.0;
    s.dt = 1e-3;
    s.n_steps = 400;
    s.trajectory_seeds = {{1.0, 0}, {1.0, 1}};
    return s;
}

inline std::vector<Scenario> all() {
    return {free_gaussian(),  free_gaussian_short(), norm_run(),     plane_wave(),
            harmonic_coherent(), harmonic_ground(),  mass_sine(),    pauli_harmonic(),
            pauli_coupled(),  kg_gaussian(),         kg_plane_wave(), weyl_massless(),
            weyl_gaussian()};
    // free_gaussian_newton, mass_sine_newton and kg_newton are registry-only
    // coarse-step variants for the force-law order measurement
}

/// Weyl eigenmode superposition (not expressible in the scenario schema;
/// used by the characteristic-form check).
inline SpinorField weyl_two_mode_state(const UniformGrid& g) {
    const double k1 = 2.0 * std::numbers::pi * 2.0 / g.length();
    const double k2 = 2.0 * std::numbers::pi * 5.0 / g.length();
    auto gamma = [](double k) { return 0.5 * std::atan2(k, 1.0); };
    const double g1 = gamma(k1), g2 = gamma(k2);
    ComplexField up(g, 0.0), down(g, 0.0);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double x = g.x(i);
        const Complex e1 = std::exp(Complex{0.0, k1 * x});
        const Complex e2 = std::exp(Complex{0.0, k2 * x});
        up.values[i] = std::cos(g1) * e1 - 0.4 * std::sin(g2) * e2;
        down.values[i] = std::sin(g1) * e1 + 0.4 * std::cos(g2) * e2;
    }
    return SpinorField(std::move(up), std::move(down));
}

/// Two positive-frequency modes of unequal weight: the phase-velocity
/// denominator crosses zero near the amplitude minima.
inline KGState kg_two_mode_state(const UniformGrid& g, bool mixed_branches) {
    const double k1 = 2.0 * std::numbers::pi * 6.0 / g.length();
    const double k2 = 2.0 * std::numbers::pi * (mixed_branches ? 9.0 : 14.0) / g.length();
    const double w1 = std::sqrt(k1 * k1 + 1.0);
    const double w2 = std::sqrt(k2 * k2 + 1.0) * (mixed_branches ? -1.0 : 1.0);
    const double b = mixed_branches ? 0.9 : 0.8;
    ComplexField psi(g, 0.0), dpsi(g, 0.0);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double x = g.x(i);
        const Complex u1 = std::exp(Complex{0.0, k1 * x});
        const Complex u2 = b * std::exp(Complex{0.0, k2 * x});
        psi.values[i] = u1 + u2;
        dpsi.values[i] = Complex{0.0, -w1} * u1 + Complex{0.0, -w2} * u2;
    }
    return KGState(std::move(psi), std::move(dpsi));
}

} // namespace ref

// ---------------------------------------------------------------------------
// Shared evaluation machinery.

class VerifyEnv {
public:
    explicit VerifyEnv(CheckOptions options) : options_(options) {}

    const CheckOptions& options() const { return options_; }

    /// Cached clean run of a scenario.
    const RunContext& context(const Scenario& s) {
        auto& slot = cache_[s.name + "/" + format_double(s.dt)];
        if (!slot) slot = std::make_shared<RunContext>(run_scenario(s));
        return *slot;
    }

    /// Fresh run with the documented fault applied to the history.
    RunContext faulted(const Scenario& s, FaultKind fault) {
        SnapshotHistory h = context(s).history();
        apply_fault(h, fault);
        return RunContext(std::move(h), s.params);
    }

    /// The context a check should evaluate: clean, or corrupted when the
    /// non-vacuity probe is active.
    std::shared_ptr<RunContext> eval_context(const Scenario& s, FaultKind fault) {
        if (options_.inject_documented_fault && fault != FaultKind::none &&
            fault != FaultKind::flip_force_sign)
            return std::make_shared<RunContext>(faulted(s, fault));
        auto& slot = cache_[s.name + "/" + format_double(s.dt)];
        if (!slot) slot = std::make_shared<RunContext>(run_scenario(s));
        return slot;
    }

    bool flip_force() const {
        return options_.inject_documented_fault;
    }

private:
    CheckOptions options_;
    std::map<std::string, std::shared_ptr<RunContext>> cache_;
};

namespace detail {

/// Interior snapshot indices to evaluate field residuals at: a coarse sweep
/// plus the neighbourhood of the fault-injection target.
inline std::vector<std::size_t> sampled_interior(std::size_t n_snapshots) {
    std::set<std::size_t> idx;
    const std::size_t stride = std::max<std::size_t>(1, n_snapshots / 16);
    for (std::size_t j = 1; j + 1 < n_snapshots; j += stride) idx.insert(j);
    const std::size_t mid = n_snapshots / 2;
    for (std::size_t j = mid > 1 ? mid - 1 : 1; j <= mid + 1 && j + 1 < n_snapshots; ++j)
        idx.insert(j);
    return {idx.begin(), idx.end()};
}

inline std::vector<double> quantile_seed_positions(const RunContext& run, int count,
                                                   int component = 0) {
    const auto& p0 = run.polar(component)[0];
    std::vector<double> density(p0.size());
    for (std::size_t i = 0; i < p0.size(); ++i) density[i] = p0.R[i] * p0.R[i];
    return quantile_seeds(density, run.grid(), count);
}

inline Scenario refined(const Scenario& s) {
    Scenario r = s;
    r.dt *= 0.5;
    r.n_steps *= 2;
    return r;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Individual checks. Each returns the residual it measured; the registry
// wraps tolerance handling and refinement ratios.

/// Max norm drift over the run; for the second-order-in-time model the
/// conserved wave-equation functional is tracked instead.
inline double measure_norm_drift(const RunContext& run) {
    const auto& h = run.history();
    double drift = 0.0;
    if (h.model == ModelKind::klein_gordon) {
        const double e0 = kg_energy(h.kg(0), run.constants());
        for (std::size_t j = 1; j < h.size(); ++j)
            drift = std::max(drift, std::abs(kg_energy(h.kg(j), run.constants()) / e0 - 1.0));
        return drift;
    }
    auto norm2 = [&](std::size_t j) {
        switch (h.model) {
            case ModelKind::pauli:
            case ModelKind::weyl: return h.spinor(j).norm_squared();
            default: return h.scalar(j).norm_squared();
        }
    };
    const double n0 = norm2(0);
    for (std::size_t j = 1; j < h.size(); ++j)
        drift = std::max(drift, std::abs(norm2(j) / n0 - 1.0));
    return drift;
}

/// Continuity residual over sampled interior snapshots. First-order models:
/// L2 of d(R^2)/dt + div j. Second-order model: L2 of d(rho)/dt - c^2 div
/// (R^2 grad S) with rho = R^2 dS/dt, relative to the L2 of its terms.
inline double measure_continuity(const RunContext& run) {
    const auto& h = run.history();
    h.require_at_least(3, "measure_continuity");
    double worst = 0.0;
    if (h.model == ModelKind::klein_gordon) {
        const auto& k = run.constants();
        auto rho = [&](std::size_t j) {
            const auto& s = h.kg(j);
            std::vector<double> out(h.grid.n);
            for (std::size_t i = 0; i < h.grid.n; ++i)
                out[i] = k.hbar * std::imag(std::conj(s.psi.values[i]) * s.dpsi_dt.values[i]);
            return out;
        };
        auto current = [&](std::size_t j) {
            const auto& s = h.kg(j);
            const auto dpsi = spectral_derivative(s.psi.values, h.grid, 1);
            std::vector<double> out(h.grid.n);
            for (std::size_t i = 0; i < h.grid.n; ++i)
                out[i] = k.c * k.c * k.hbar * std::imag(std::conj(s.psi.values[i]) * dpsi[i]);
            return out;
        };
        for (std::size_t j : detail::sampled_interior(h.size())) {
            const auto rm = rho(j - 1);
            const auto rp = rho(j + 1);
            const auto div_cur = gradient(current(j), h.grid);
            const auto& mask = run.polar(0)[j].node_mask;
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < h.grid.n; ++i) {
                if (mask[i]) continue;
                const double dr = (rp[i] - rm[i]) / (2.0 * h.dt);
                num += (dr - div_cur[i]) * (dr - div_cur[i]);
                den += div_cur[i] * div_cur[i] + dr * dr;
            }
            worst = std::max(worst, std::sqrt(num / std::max(den, 1e-300)));
        }
        return worst;
    }
    const MassSpec* mass =
        h.model == ModelKind::nonconstant_mass ? &run.params().mass_profile : nullptr;
    const int comps = run.components();
    for (int c = 0; c < comps; ++c) {
        const auto& pf = run.polar(c);
        for (std::size_t j : detail::sampled_interior(h.size()))
            worst = std::max(
                worst, continuity_residual(pf[j - 1], pf[j], pf[j + 1], run.constants(), mass));
    }
    return worst;
}

/// Linf residual of dS/dt + (grad S)^2/2m + V + Q over sampled interior
/// snapshots (variable-mass form included), off the node masks.
inline double measure_qhj(const RunContext& run) {
    const auto& h = run.history();
    h.require_at_least(3, "measure_qhj");
    const auto& k = run.constants();
    const auto& mp = run.params();
    const auto v = mp.potential.values(h.grid, k);
    const auto m = mp.mass_profile.values(h.grid, k);
    const auto dm = mp.mass_profile.gradient_values(h.grid, k);
    const bool varying = mp.model == ModelKind::nonconstant_mass;
    const auto& dSdt = run.dS_dt_fields(0);
    const auto& pf = run.polar(0);

    double worst = 0.0;
    for (std::size_t j : detail::sampled_interior(h.size())) {
        ComplexField f(h.grid, h.times[j], pf[j].psi);
        const LogDerivatives ld(f, pf[j].node_mask, 2, k.hbar);
        for (std::size_t i = 0; i < h.grid.n; ++i) {
            if (!ld.defined(i) || !dSdt[j].defined[i]) continue;
            const double gS = ld.grad_S(i);
            const double q = -k.hbar * k.hbar / (2.0 * m[i]) * ld.lap_R_over_R(i) +
                             (varying ? k.hbar * k.hbar * dm[i] * ld.grad_lnR(i) /
                                            (2.0 * m[i] * m[i])
                                      : 0.0);
            worst = std::max(worst,
                             std::abs(dSdt[j].values[i] + gS * gS / (2.0 * m[i]) + v[i] + q));
        }
    }
    return worst;
}

/// Largest endpoint residual of the history-integral action equation over
/// the scenario's quantile ensemble; also enforces the quadratic growth
/// envelope between the half and full span.
struct SEquationOutcome {
    double worst = 0.0;
    bool growth_ok = true;
};

inline SEquationOutcome measure_s_equation(const RunContext& run, int n_seeds) {
    SEquationOutcome out;
    const double scale = run.constants().hbar * run.constants().hbar /
                         (2.0 * run.constants().mass);
    for (double seed : detail::quantile_seed_positions(run, n_seeds)) {
        const auto tr = run.trajectory(seed);
        const auto res = s_equation_residuals(tr, run);
        for (double r : res) out.worst = std::max(out.worst, std::abs(r));
        const std::size_t half = res.size() / 2;
        if (std::abs(res.back()) > 4.5 * std::abs(res[half]) + 1e-5 * scale)
            out.growth_ok = false;
    }
    return out;
}

/// Worst relative deviation between the reconstructed and directly sampled
/// amplitude over an ensemble of quantile-seeded curves.
inline double measure_density_reconstruction(const RunContext& run, int n_seeds) {
    double worst = 0.0;
    const int comps = run.components();
    for (int c = 0; c < comps; ++c) {
        for (double seed : detail::quantile_seed_positions(run, n_seeds, c)) {
            const auto tr = run.trajectory(seed, c);
            const auto recon = density_along_trajectory(tr, run);
            double scale = 0.0;
            for (std::size_t j = 0; j < tr.size(); ++j)
                scale = std::max(scale, tr.samples[j].R);
            for (std::size_t j = 0; j < tr.size(); ++j)
                worst = std::max(worst, std::abs(recon[j] - tr.samples[j].R) / scale);
        }
    }
    return worst;
}

/// Worst relative trajectory force-law residual over the seed ensemble.
inline double measure_newton(const RunContext& run, bool flip_force, int n_seeds) {
    double worst = 0.0;
    const int comps = run.components();
    for (int c = 0; c < comps; ++c) {
        if (run.params().model == ModelKind::weyl) break;
        for (double seed : detail::quantile_seed_positions(run, n_seeds, c)) {
            const auto tr = run.trajectory(seed, c);
            const auto rn = newton_residual(tr, run, flip_force);
            worst = std::max(worst, rn.relative());
        }
    }
    return worst;
}

/// Second-derivative consistency: pointwise R*Sigma - lap R (relative to
/// max |lap R|), plus time-constancy of the two reconstruction ratios.
struct SecondDerivativeOutcome {
    double pointwise = 0.0;
    double ratio_drift = 0.0;
    bool degenerate = true; // no resolvable points anywhere
};

inline SecondDerivativeOutcome measure_second_derivative(const RunContext& run) {
    SecondDerivativeOutcome out;
    const auto& h = run.history();
    h.require_at_least(3, "measure_second_derivative");
    const auto& k = run.constants();
    const auto v = run.params().potential.values(h.grid, k);
    const auto& dSdt = run.dS_dt_fields(0);
    const auto& pf = run.polar(0);
    const double m = k.mass;

    std::vector<double> ratio66_ref, ratio67_ref;
    std::vector<std::uint8_t> ref66_set(h.grid.n, 0), ref67_set(h.grid.n, 0);
    ratio66_ref.assign(h.grid.n, 0.0);
    ratio67_ref.assign(h.grid.n, 0.0);

    for (std::size_t j : detail::sampled_interior(h.size())) {
        ComplexField f(h.grid, h.times[j], pf[j].psi);
        const LogDerivatives ld(f, pf[j].node_mask, 2, k.hbar);

        // field scales for the degeneracy thresholds, anchored to the
        // run's characteristic energy so numerical noise never qualifies
        double max_lapR = 0.0, max_sigma = 0.0, max_R = 0.0, e_char = 0.0;
        double max_r_small = 0.0, max_R_lapS = 0.0;
        std::vector<double> sigma(h.grid.n, 0.0), lapR(h.grid.n, 0.0), lapS(h.grid.n, 0.0);
        for (std::size_t i = 0; i < h.grid.n; ++i) {
            if (!ld.defined(i) || !dSdt[j].defined[i]) continue;
            const double gS = ld.grad_S(i);
            sigma[i] = 2.0 * m / (k.hbar * k.hbar) *
                       (dSdt[j].values[i] + gS * gS / (2.0 * m) + v[i]);
            lapR[i] = pf[j].R[i] * ld.lap_R_over_R(i);
            lapS[i] = ld.lap_S(i);
            max_lapR = std::max(max_lapR, std::abs(lapR[i]));
            max_sigma = std::max(max_sigma, std::abs(sigma[i]));
            max_R = std::max(max_R, pf[j].R[i]);
            e_char = std::max(e_char, std::abs(dSdt[j].values[i]) +
                                          gS * gS / (2.0 * m) + std::abs(v[i]));
            max_R_lapS = std::max(max_R_lapS, std::abs(pf[j].R[i] * lapS[i]));
            if (j > 0 && j + 1 < h.size()) {
                const double dR_dt = (pf[j + 1].R[i] - pf[j - 1].R[i]) / (2.0 * h.dt);
                max_r_small = std::max(
                    max_r_small,
                    std::abs(2.0 * m * (dR_dt + pf[j].R[i] * ld.grad_lnR(i) * gS / m)));
            }
        }
        const double sigma_floor = 1e-4 * 2.0 * m / (k.hbar * k.hbar) * e_char;
        const double lapR_floor = sigma_floor * max_R;
        const double lapS_floor = 1e-4 * 2.0 * m / k.hbar * max_R *
                                  (e_char > 0.0 ? e_char : 1.0);
        const bool laps_resolvable =
            std::max(max_R_lapS, max_r_small) > lapS_floor && max_R_lapS > 0.0;
        if (max_lapR < lapR_floor || max_sigma < sigma_floor) continue; // degenerate

        for (std::size_t i = 0; i < h.grid.n; ++i) {
            if (!ld.defined(i) || !dSdt[j].defined[i]) continue;
            const bool resolvable66 = std::abs(lapR[i]) > 0.05 * max_lapR &&
                                      std::abs(sigma[i]) > 0.05 * max_sigma;
            if (!resolvable66) continue;
            out.degenerate = false;
            out.pointwise = std::max(
                out.pointwise, std::abs(pf[j].R[i] * sigma[i] - lapR[i]) / max_lapR);

            const double r66 = lapR[i] / (pf[j].R[i] * sigma[i]);
            if (!ref66_set[i]) {
                ratio66_ref[i] = r66;
                ref66_set[i] = 1;
            } else {
                out.ratio_drift = std::max(out.ratio_drift, std::abs(r66 - ratio66_ref[i]));
            }

            // continuity-rearranged ratio for the action laplacian
            if (laps_resolvable &&
                std::abs(pf[j].R[i] * lapS[i]) > 0.05 * max_R_lapS && j > 0 &&
                j + 1 < h.size()) {
                const double dR_dt = (pf[j + 1].R[i] - pf[j - 1].R[i]) / (2.0 * h.dt);
                const double r_small =
                    2.0 * m *
                    (dR_dt + pf[j].R[i] * ld.grad_lnR(i) * ld.grad_S(i) / m);
                const double r67 = -r_small / (pf[j].R[i] * lapS[i]);
                if (!ref67_set[i]) {
                    ratio67_ref[i] = r67;
                    ref67_set[i] = 1;
                } else {
                    out.ratio_drift =
                        std::max(out.ratio_drift, std::abs(r67 - ratio67_ref[i]));
                }
            }
        }
    }
    return out;
}

/// Euler-Lagrange route against the direct equation residuals, plus the
/// stationarity of the energy integral.
struct LagrangianOutcome {
    double route_gap = 0.0;    // Linf between the two residual routes
    double energy_drift = 0.0; // relative drift of the spatial energy integral
};

inline LagrangianOutcome measure_lagrangian(const RunContext& run) {
    LagrangianOutcome out;
    const auto& h = run.history();
    h.require_at_least(3, "measure_lagrangian");
    const auto& k = run.constants();
    const auto& mp = run.params();
    const auto& pf = run.polar(0);
    const auto v = mp.potential.values(h.grid, k);
    const auto& dSdt = run.dS_dt_fields(0);

    double e0 = 0.0;
    bool have_e0 = false;
    for (std::size_t j : detail::sampled_interior(h.size())) {
        const auto el = euler_lagrange_residuals(pf[j - 1], pf[j], pf[j + 1], mp.potential, k);

        // direct routes
        const auto div_j = gradient(flux(pf[j], k), h.grid);
        ComplexField f(h.grid, h.times[j], pf[j].psi);
        const LogDerivatives ld(f, pf[j].node_mask, 2, k.hbar);
        for (std::size_t i = 0; i < h.grid.n; ++i) {
            if (!el.in_S.defined[i] || !dSdt[j].defined[i] || !ld.defined(i)) continue;
            const double d_rho_dt =
                (pf[j + 1].R[i] * pf[j + 1].R[i] - pf[j - 1].R[i] * pf[j - 1].R[i]) /
                (2.0 * h.dt);
            const double direct_S = d_rho_dt + div_j[i];
            out.route_gap = std::max(out.route_gap, std::abs(el.in_S.values[i] + direct_S));

            const double gS = ld.grad_S(i);
            const double qhj = dSdt[j].values[i] + gS * gS / (2.0 * k.mass) + v[i] -
                               k.hbar * k.hbar / (2.0 * k.mass) * ld.lap_R_over_R(i);
            const double el_as_qhj = el.in_R.values[i] / (-2.0 * pf[j].R[i]);
            out.route_gap = std::max(out.route_gap, std::abs(el_as_qhj - qhj));
        }

        const double energy = integrate_masked(hamiltonian_density(pf[j], mp.potential, k),
                                               h.grid);
        if (!have_e0) {
            e0 = energy;
            have_e0 = true;
        } else {
            out.energy_drift = std::max(out.energy_drift, std::abs(energy / e0 - 1.0));
        }
    }
    return out;
}

/// Superluminal and sign-indefiniteness statistics of the relativistic
/// velocity field and density.
struct KgFlagsOutcome {
    double superluminal_fraction = 0.0;
    double negative_fraction = 0.0;
    double positive_fraction = 0.0;
    double dispersion_gap = 0.0;     // only meaningful for single-mode runs
    double velocity_checksum = 0.0;  // mean |v|; detects corrupted inputs
};

inline KgFlagsOutcome measure_kg_flags(const RunContext& run,
                                       std::optional<double> expected_speed) {
    KgFlagsOutcome out;
    const auto& h = run.history();
    const auto& k = run.constants();
    std::size_t total = 0, super = 0, neg = 0, pos = 0;
    for (std::size_t j : detail::sampled_interior(h.size())) {
        const auto& st = h.kg(j);
        const auto& p = run.polar(0)[j];
        const auto dSdt = kg_dS_dt(st, p.node_mask, k.hbar);
        const auto vel = velocity_klein_gordon(p, dSdt, k);
        for (std::size_t i = 0; i < h.grid.n; ++i) {
            if (!vel.defined[i]) continue;
            ++total;
            if (std::abs(vel.v[i]) > k.c) ++super;
            const double rho = p.R[i] * p.R[i] * dSdt[i];
            (rho < 0.0 ? neg : pos) += 1;
            out.velocity_checksum += std::abs(vel.v[i]);
            if (expected_speed)
                out.dispersion_gap =
                    std::max(out.dispersion_gap, std::abs(std::abs(vel.v[i]) - *expected_speed));
        }
    }
    if (total > 0) {
        out.velocity_checksum /= static_cast<double>(total);
        out.superluminal_fraction = static_cast<double>(super) / static_cast<double>(total);
        out.negative_fraction = static_cast<double>(neg) / static_cast<double>(total);
        out.positive_fraction = static_cast<double>(pos) / static_cast<double>(total);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Registry: named instances with pinned tolerances and their documented
// faults. A scenario's `tolerances` map may override the default of any
// check base name; --tol-scale multiplies every tolerance.

struct CheckInstance {
    std::string name;
    FaultKind fault = FaultKind::none;
    std::function<CheckResult(VerifyEnv&)> run;
};

namespace detail {

inline double tol_for(const Scenario& s, const std::string& base, double dflt,
                      const CheckOptions& opts) {
    const auto it = s.tolerances.find(base);
    return (it != s.tolerances.end() ? it->second : dflt) * opts.tol_scale;
}

inline std::string ratio_detail(double coarse, double fine, double required) {
    std::ostringstream os;
    os << "refinement " << format_double(coarse) << " -> " << format_double(fine)
       << " (ratio " << format_double(fine > 0.0 ? coarse / fine : 0.0) << ", need >= "
       << format_double(required) << ")";
    return os.str();
}

} // namespace detail

class CheckRegistry {
public:
    CheckRegistry() { build(); }

    const std::vector<CheckInstance>& instances() const { return instances_; }

    static const std::vector<std::string>& base_names() {
        static const std::vector<std::string> names{
            "check_continuity",
            "check_qhj_residual",
            "check_s_equation_residual",
            "check_density_reconstruction",
            "check_newton",
            "check_second_derivative_consistency",
            "check_weyl_characteristic_forms",
            "check_kg_flags",
            "check_lagrangian_consistency",
            "check_norm_liouville",
        };
        return names;
    }

private:
    void add(const std::string& base, const std::string& scenario, FaultKind fault,
             std::function<CheckResult(VerifyEnv&)> fn) {
        instances_.push_back({base + "[" + scenario + "]", fault, std::move(fn)});
    }

    /// Simple residual-vs-tolerance wrapper with optional dt-refinement.
    template <class Measure>
    void add_residual_check(const std::string& base, Scenario scenario, FaultKind fault,
                            double default_tol, bool with_order, double required_ratio,
                            Measure measure) {
        add(base, scenario.name, fault,
            [base, scenario, fault, default_tol, with_order, required_ratio,
             measure](VerifyEnv& env) {
                CheckResult r;
                r.tolerance = detail::tol_for(scenario, base, default_tol, env.options());
                auto ctx = env.eval_context(scenario, fault);
                r.residual = measure(*ctx, env);
                r.passed = r.residual < r.tolerance;
                if (with_order && r.passed) {
                    auto fine_ctx = env.eval_context(detail::refined(scenario), fault);
                    const double fine = measure(*fine_ctx, env);
                    r.detail = detail::ratio_detail(r.residual, fine, required_ratio);
                    if (!(fine > 0.0) || r.residual / fine < required_ratio) r.passed = false;
                }
                return r;
            });
    }

    void build();

    std::vector<CheckInstance> instances_;
};

inline void CheckRegistry::build() {
    const double order2 = 3.5;          // 2^2 with the 0.2 slack
    const double order18 = std::pow(2.0, 1.8);

    // --- norm / conserved-functional drift -------------------------------
    for (const auto& sc : {ref::norm_run(), ref::mass_sine(), ref::pauli_harmonic(),
                           ref::weyl_gaussian(), ref::kg_gaussian()}) {
        add_residual_check("check_norm_liouville", sc, FaultKind::scale_snapshot, 1e-10, false,
                           0.0,
                           [](const RunContext& run, VerifyEnv&) {
                               return measure_norm_drift(run);
                           });
    }

    // --- continuity -------------------------------------------------------
    add_residual_check("check_continuity", ref::free_gaussian(), FaultKind::scale_snapshot,
                       1e-4, true, order2,
                       [](const RunContext& run, VerifyEnv&) { return measure_continuity(run); });
    add_residual_check("check_continuity", ref::plane_wave(), FaultKind::scale_snapshot, 1e-10,
                       false, 0.0,
                       [](const RunContext& run, VerifyEnv&) { return measure_continuity(run); });
    add_residual_check("check_continuity", ref::harmonic_ground(), FaultKind::scale_snapshot,
                       1e-8, false, 0.0,
                       [](const RunContext& run, VerifyEnv&) { return measure_continuity(run); });
    add_residual_check("check_continuity", ref::mass_sine(), FaultKind::scale_snapshot, 1e-4,
                       true, order2,
                       [](const RunContext& run, VerifyEnv&) { return measure_continuity(run); });
    add_residual_check("check_continuity", ref::kg_gaussian(), FaultKind::scale_snapshot, 1e-4,
                       true, order2,
                       [](const RunContext& run, VerifyEnv&) { return measure_continuity(run); });

    // --- quantum Hamilton-Jacobi residual ----------------------------------
    add_residual_check("check_qhj_residual", ref::free_gaussian(), FaultKind::phase_kick, 1e-4,
                       true, order2,
                       [](const RunContext& run, VerifyEnv&) { return measure_qhj(run); });
    add_residual_check("check_qhj_residual", ref::plane_wave(), FaultKind::phase_kick, 1e-8,
                       false, 0.0,
                       [](const RunContext& run, VerifyEnv&) { return measure_qhj(run); });
    add_residual_check("check_qhj_residual", ref::harmonic_ground(), FaultKind::phase_kick,
                       1e-6, false, 0.0,
                       [](const RunContext& run, VerifyEnv&) { return measure_qhj(run); });
    add_residual_check("check_qhj_residual", ref::mass_sine(), FaultKind::phase_kick, 1e-4,
                       true, order2,
                       [](const RunContext& run, VerifyEnv&) { return measure_qhj(run); });

    // --- history-integral action equation ---------------------------------
    add_residual_check("check_s_equation_residual", ref::plane_wave(), FaultKind::phase_kick,
                       1e-8, false, 0.0, [](const RunContext& run, VerifyEnv&) {
                           return measure_s_equation(run, 1).worst;
                       });
    {
        const Scenario sc = ref::free_gaussian_short();
        add(
            "check_s_equation_residual", sc.name, FaultKind::phase_kick, [sc](VerifyEnv& env) {
                CheckResult r;
                const double scale = 0.5; // hbar^2 / 2 m sigma0^2
                r.tolerance =
                    detail::tol_for(sc, "check_s_equation_residual", 5e-3, env.options()) *
                    scale;
                auto ctx = env.eval_context(sc, FaultKind::phase_kick);
                const auto outcome = measure_s_equation(*ctx, 9);
                r.residual = outcome.worst;
                r.passed = r.residual < r.tolerance && outcome.growth_ok;
                r.detail = outcome.growth_ok ? "growth within the quadratic envelope"
                                             : "growth envelope exceeded";
                return r;
            });
    }

    // --- along-curve density reconstruction -------------------------------
    for (const auto& sc : {ref::harmonic_coherent(), ref::mass_sine(), ref::kg_gaussian()}) {
        add_residual_check("check_density_reconstruction", sc, FaultKind::scale_snapshot, 1e-3,
                           false, 0.0, [](const RunContext& run, VerifyEnv&) {
                               return measure_density_reconstruction(run, 16);
                           });
    }
    {
        const Scenario sc = ref::free_gaussian();
        add("check_density_reconstruction", sc.name, FaultKind::scale_snapshot,
            [sc](VerifyEnv& env) {
                CheckResult r;
                r.tolerance =
                    detail::tol_for(sc, "check_density_reconstruction", 1e-3, env.options());
                auto ctx = env.eval_context(sc, FaultKind::scale_snapshot);
                r.residual = measure_density_reconstruction(*ctx, 16);
                r.passed = r.residual < r.tolerance;
                if (r.passed) {
                    // the residual is dx-interpolation bound at this dt, so
                    // the improvement is measured under joint dt+dx refinement
                    Scenario fine = detail::refined(sc);
                    fine.name = "free_gaussian_fine_grid";
                    fine.grid = UniformGrid(sc.grid.x_min, sc.grid.x_max, sc.grid.n * 2);
                    auto fine_ctx = env.eval_context(fine, FaultKind::scale_snapshot);
                    const double fine_res = measure_density_reconstruction(*fine_ctx, 16);
                    r.detail = detail::ratio_detail(r.residual, fine_res, 1.5) +
                               " (joint dt+dx)";
                    if (!(fine_res > 0.0) || r.residual / fine_res < 1.5) r.passed = false;
                }
                return r;
            });
    }

    // --- trajectory force law ----------------------------------------------
    add("check_newton", "plane_wave", FaultKind::flip_force_sign, [](VerifyEnv& env) {
        CheckResult r;
        const Scenario sc = ref::plane_wave();
        r.tolerance = detail::tol_for(sc, "check_newton", 1e-6, env.options());
        auto ctx = env.eval_context(sc, FaultKind::none);
        const auto tr = ctx->trajectory(-4.0);
        r.residual = newton_residual(tr, *ctx, env.flip_force()).linf;
        r.passed = r.residual < r.tolerance;
        return r;
    });
    for (const auto& sc : {ref::harmonic_coherent(), ref::pauli_harmonic()}) {
        add("check_newton", sc.name, FaultKind::flip_force_sign, [sc, order18](VerifyEnv& env) {
            CheckResult r;
            const double omega = sc.params.model == ModelKind::pauli
                                     ? sc.params.external_field->phi.omega
                                     : sc.params.potential.omega;
            const double amplitude = sc.initial_state.x0;
            r.tolerance = detail::tol_for(sc, "check_newton", 1e-3, env.options()) * omega *
                          omega * amplitude;
            auto ctx = env.eval_context(sc, FaultKind::none);

            // closed form: the packet's classical center drives every curve
            double closed_gap = 0.0;
            const int comps = ctx->components();
            for (int c = 0; c < comps; ++c) {
                for (double seed : detail::quantile_seed_positions(*ctx, 5, c)) {
                    const auto tr = ctx->trajectory(seed, c);
                    const double dt = tr.times[1] - tr.times[0];
                    for (std::size_t j = 1; j + 1 < tr.size(); ++j) {
                        const double acc = (tr.positions[j + 1] - 2.0 * tr.positions[j] +
                                            tr.positions[j - 1]) /
                                           (dt * dt);
                        closed_gap = std::max(
                            closed_gap, std::abs(acc + omega * omega * amplitude *
                                                           std::cos(omega * tr.times[j])));
                    }
                }
            }
            const double coarse = measure_newton(*ctx, env.flip_force(), 5);
            r.residual = env.flip_force()
                             ? std::max(closed_gap, coarse * omega * omega * amplitude)
                             : closed_gap;
            r.passed = r.residual < r.tolerance;
            if (r.passed) {
                auto fine_ctx = env.eval_context(detail::refined(sc), FaultKind::none);
                const double fine = measure_newton(*fine_ctx, false, 5);
                r.detail = detail::ratio_detail(coarse, fine, order18);
                if (!(fine > 0.0) || coarse / fine < order18) r.passed = false;
            }
            return r;
        });
    }
    add_residual_check("check_newton", ref::mass_sine(), FaultKind::flip_force_sign, 2e-3,
                       false, 0.0, [](const RunContext& run, VerifyEnv& env) {
                           return measure_newton(run, env.flip_force(), 5);
                       });
    add_residual_check("check_newton", ref::kg_gaussian(), FaultKind::flip_force_sign, 5e-3,
                       false, 0.0, [](const RunContext& run, VerifyEnv& env) {
                           return measure_newton(run, env.flip_force(), 5);
                       });
    // order measurements on coarse-step variants: there the finite-difference
    // truncation dominates the dx-bound interpolation and round-off floors
    add_residual_check("check_newton", ref::free_gaussian_newton(), FaultKind::flip_force_sign,
                       2e-3, true, order2, [](const RunContext& run, VerifyEnv& env) {
                           return measure_newton(run, env.flip_force(), 5);
                       });
    add_residual_check("check_newton", ref::mass_sine_newton(), FaultKind::flip_force_sign,
                       2e-3, true, order18, [](const RunContext& run, VerifyEnv& env) {
                           return measure_newton(run, env.flip_force(), 5);
                       });
    {
        const Scenario sc = ref::kg_newton();
        add("check_newton", sc.name, FaultKind::flip_force_sign, [sc, order18](VerifyEnv& env) {
            CheckResult r;
            r.tolerance = detail::tol_for(sc, "check_newton", 5e-3, env.options());
            auto ctx = env.eval_context(sc, FaultKind::none);
            r.residual = measure_newton(*ctx, env.flip_force(), 5);
            r.passed = r.residual < r.tolerance;
            if (r.passed) {
                // the relativistic trajectories are gentle enough that the
                // space-interpolation part dominates; refine dt and dx jointly
                Scenario fine = detail::refined(sc);
                fine.name = "kg_newton_fine_grid";
                fine.grid = UniformGrid(sc.grid.x_min, sc.grid.x_max, sc.grid.n * 2);
                auto fine_ctx = env.eval_context(fine, FaultKind::none);
                const double fine_res = measure_newton(*fine_ctx, false, 5);
                r.detail = detail::ratio_detail(r.residual, fine_res, order18) +
                           " (joint dt+dx)";
                if (!(fine_res > 0.0) || r.residual / fine_res < order18) r.passed = false;
            }
            return r;
        });
    }

    // --- second-derivative consistency -------------------------------------
    for (const auto& sc : {ref::harmonic_ground(), ref::free_gaussian(), ref::plane_wave()}) {
        const double tol63 = sc.name == "harmonic_ground" ? 1e-6 : 1e-3;
        add("check_second_derivative_consistency", sc.name, FaultKind::phase_kick,
            [sc, tol63](VerifyEnv& env) {
                CheckResult r;
                r.tolerance =
                    detail::tol_for(sc, "check_second_derivative_consistency", tol63,
                                    env.options());
                const double ratio_tol =
                    detail::tol_for(sc, "check_second_derivative_consistency", 1e-3,
                                    env.options());
                auto ctx = env.eval_context(sc, FaultKind::phase_kick);
                const auto outcome = measure_second_derivative(*ctx);
                if (outcome.degenerate) {
                    r.skipped = true;
                    r.detail = "degenerate: amplitude curvature and Sigma vanish";
                    return r;
                }
                r.residual = std::max(outcome.pointwise, outcome.ratio_drift);
                r.passed =
                    outcome.pointwise < r.tolerance && outcome.ratio_drift < ratio_tol;
                std::ostringstream os;
                os << "pointwise " << format_double(outcome.pointwise) << ", ratio drift "
                   << format_double(outcome.ratio_drift);
                r.detail = os.str();
                return r;
            });
    }

    // --- spinor characteristic forms ----------------------------------------
    add("check_weyl_characteristic_forms", "weyl_massless", FaultKind::phase_kick,
        [](VerifyEnv& env) {
            CheckResult r;
            const Scenario base = ref::weyl_massless();
            r.tolerance =
                detail::tol_for(base, "check_weyl_characteristic_forms", 1e-6, env.options());
            for (auto family : {WeylFamily::per_component, WeylFamily::full_system}) {
                Scenario sc = base;
                sc.params.weyl_family = family;
                sc.name = base.name + (family == WeylFamily::full_system ? "_fs" : "");
                auto ctx = env.eval_context(sc, FaultKind::phase_kick);
                for (int comp : {0, 1}) {
                    const auto tr = ctx->trajectory(0.5, comp);
                    const auto forms = weyl_characteristic_form_residuals(tr, *ctx, family);
                    r.residual =
                        std::max({r.residual, forms.amplitude.linf, forms.action.linf});
                }
            }
            r.passed = r.residual < r.tolerance;
            return r;
        });
    for (auto family : {WeylFamily::per_component, WeylFamily::full_system}) {
        const std::string inst =
            family == WeylFamily::per_component ? "weyl_two_mode_pc" : "weyl_two_mode_fs";
        add("check_weyl_characteristic_forms", inst, FaultKind::phase_kick,
            [family](VerifyEnv& env) {
                CheckResult r;
                r.tolerance = 1e-3 * env.options().tol_scale;
                auto residual_at = [&](std::size_t n, double dt, int steps) {
                    const UniformGrid g(-25.0, 25.0, n);
                    ModelParams mp;
                    mp.model = ModelKind::weyl;
                    mp.eps_node = 1e-4;
                    mp.weyl_family = family;
                    auto h = propagate(ref::weyl_two_mode_state(g), mp, g, dt, steps);
                    if (env.options().inject_documented_fault)
                        apply_fault(h, FaultKind::phase_kick);
                    RunContext run(std::move(h), mp);
                    const auto tr = run.trajectory(1.0, 0);
                    const auto forms = weyl_characteristic_form_residuals(tr, run, family);
                    return std::max(forms.amplitude.relative(), forms.action.relative());
                };
                const double coarse = residual_at(512, 4e-3, 150);
                r.residual = coarse;
                r.passed = coarse < r.tolerance;
                if (r.passed) {
                    const double fine = residual_at(1024, 2e-3, 300);
                    r.detail = detail::ratio_detail(coarse, fine, 3.5) + " (joint dt+dx)";
                    if (!(fine > 0.0) || coarse / fine < 3.5) r.passed = false;
                }
                return r;
            });
    }
    add("check_weyl_characteristic_forms", "families_differ", FaultKind::phase_kick,
        [](VerifyEnv& env) {
            CheckResult r;
            const Scenario base = ref::weyl_gaussian();
            Scenario pc = base;
            pc.name = "weyl_gaussian_pc";
            pc.params.weyl_family = WeylFamily::per_component;
            auto ctx_fs = env.eval_context(base, FaultKind::none);
            auto ctx_pc = env.eval_context(pc, FaultKind::none);
            const auto a = ctx_pc->trajectory(1.0, 0);
            const auto b = ctx_fs->trajectory(1.0, 0);
            double gap = 0.0;
            for (std::size_t j = 0; j < std::min(a.size(), b.size()); ++j)
                gap = std::max(gap, std::abs(a.positions[j] - b.positions[j]));
            r.residual = gap;
            r.tolerance = 10.0 * base.grid.dx(); // families must separate beyond this
            r.passed = gap > r.tolerance;
            r.detail = "separation must exceed the tolerance";
            return r;
        });

    // --- relativistic velocity flags -----------------------------------------
    add("check_kg_flags", "kg_plane_wave", FaultKind::corrupt_dpsi_dt, [](VerifyEnv& env) {
        CheckResult r;
        const Scenario sc = ref::kg_plane_wave();
        r.tolerance = detail::tol_for(sc, "check_kg_flags", 1e-10, env.options());
        auto ctx = env.eval_context(sc, FaultKind::corrupt_dpsi_dt);
        const double k = sc.initial_state.k;
        const double omega = std::sqrt(k * k + 1.0);
        const auto outcome = measure_kg_flags(*ctx, k / omega);
        r.residual = std::max(outcome.dispersion_gap, outcome.superluminal_fraction);
        const bool uniform_sign =
            outcome.negative_fraction == 0.0 || outcome.positive_fraction == 0.0;
        r.passed = outcome.superluminal_fraction == 0.0 && outcome.dispersion_gap < r.tolerance &&
                   uniform_sign;
        std::ostringstream os;
        os << "superluminal fraction " << format_double(outcome.superluminal_fraction)
           << ", density sign " << (uniform_sign ? "uniform" : "indefinite");
        r.detail = os.str();
        return r;
    });
    for (bool mixed : {false, true}) {
        add("check_kg_flags", mixed ? "kg_two_mode_indefinite" : "kg_two_mode_superluminal",
            FaultKind::corrupt_dpsi_dt, [mixed](VerifyEnv& env) {
                CheckResult r;
                const UniformGrid g = ref::grid();
                ModelParams mp;
                mp.model = ModelKind::klein_gordon;
                mp.eps_node = 1e-4;
                auto h = propagate(ref::kg_two_mode_state(g, mixed), mp, g, 1e-3, 100);
                if (env.options().inject_documented_fault)
                    apply_fault(h, FaultKind::corrupt_dpsi_dt);
                RunContext run(std::move(h), mp);
                const auto outcome = measure_kg_flags(run, std::nullopt);
                r.tolerance = 0.0;
                if (mixed) {
                    r.residual = std::min(outcome.negative_fraction, outcome.positive_fraction);
                    r.passed = outcome.negative_fraction > 0.0 && outcome.positive_fraction > 0.0;
                    r.detail = "density changes sign";
                } else {
                    r.residual = outcome.superluminal_fraction;
                    r.passed = outcome.superluminal_fraction > 0.0;
                    r.detail = "superluminal region nonempty";
                }
                // the fault makes the qualitative claim trip the opposite way:
                // corrupted dpsi/dt must not silently keep the check green
                if (env.options().inject_documented_fault) {
                    const auto clean = measure_kg_flags(
                        RunContext(propagate(ref::kg_two_mode_state(g, mixed), mp, g, 1e-3, 100),
                                   mp),
                        std::nullopt);
                    const double gap =
                        std::abs(clean.superluminal_fraction - outcome.superluminal_fraction) +
                        std::abs(clean.negative_fraction - outcome.negative_fraction) +
                        std::abs(clean.velocity_checksum - outcome.velocity_checksum);
                    r.passed = r.passed && gap < 1e-12;
                    r.detail += "; corrupted statistics must match the clean run";
                }
                return r;
            });
    }

    // --- variational consistency ---------------------------------------------
    add("check_lagrangian_consistency", "free_gaussian", FaultKind::scale_snapshot,
        [](VerifyEnv& env) {
            CheckResult r;
            const Scenario sc = ref::free_gaussian();
            r.tolerance =
                detail::tol_for(sc, "check_lagrangian_consistency", 1e-6, env.options());
            auto ctx = env.eval_context(sc, FaultKind::scale_snapshot);
            const auto outcome = measure_lagrangian(*ctx);
            // the energy integral of a spreading packet is conserved too
            r.residual = std::max(outcome.route_gap, outcome.energy_drift * 1e-2);
            r.passed = outcome.route_gap < r.tolerance && outcome.energy_drift < 1e-6;
            std::ostringstream os;
            os << "route gap " << format_double(outcome.route_gap) << ", energy drift "
               << format_double(outcome.energy_drift);
            r.detail = os.str();
            return r;
        });
    add("check_lagrangian_consistency", "harmonic_ground", FaultKind::scale_snapshot,
        [](VerifyEnv& env) {
            CheckResult r;
            const Scenario sc = ref::harmonic_ground();
            r.tolerance =
                detail::tol_for(sc, "check_lagrangian_consistency", 1e-8, env.options());
            auto ctx = env.eval_context(sc, FaultKind::scale_snapshot);
            const auto outcome = measure_lagrangian(*ctx);
            r.residual = outcome.energy_drift;
            r.passed = outcome.energy_drift < r.tolerance && outcome.route_gap < 1e-6;
            return r;
        });
}

/// Run the selected checks ("all" or a comma-separated list of base names).
inline DiagnosticsReport run_checks(const std::string& selector, const CheckOptions& options) {
    std::set<std::string> wanted;
    if (selector != "all") {
        std::stringstream ss(selector);
        std::string token;
        while (std::getline(ss, token, ',')) {
            if (token.empty()) continue;
            const auto& names = CheckRegistry::base_names();
            if (std::find(names.begin(), names.end(), token) == names.end())
                throw ValidationError("check_name", "unknown check: " + token);
            wanted.insert(token);
        }
        if (wanted.empty()) throw ValidationError("check_name", "empty check selection");
    }

    const CheckRegistry registry;
    VerifyEnv env(options);
    DiagnosticsReport report;
    for (const auto& inst : registry.instances()) {
        const std::string base = inst.name.substr(0, inst.name.find('['));
        if (!wanted.empty() && !wanted.count(base)) continue;
        const auto start = std::chrono::steady_clock::now();
        CheckResult r = inst.run(env);
        r.name = inst.name;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count();
        report.entries.push_back(std::move(r));
    }
    return report;
}

} // namespace qtraj
