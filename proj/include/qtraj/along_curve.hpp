#pragma once

#include <cmath>
#include <initializer_list>
#include <numbers>
#include <string>
#include <vector>

#include "qtraj/derivatives.hpp"
#include "qtraj/run_context.hpp"

namespace qtraj {

/// L-infinity residual together with the scale of the competing terms.
struct ResidualNorm {
    double linf = 0.0;
    double scale = 0.0;
    double relative() const { return scale > 0.0 ? linf / scale : linf; }
};

namespace detail {

inline void require_completed(const Trajectory& tr, const char* what) {
    if (tr.status != TrajectoryStatus::completed)
        throw NodeCrossingError(std::string(what) + ": trajectory did not complete");
    if (tr.size() < 3)
        throw InsufficientHistoryError(std::string(what) + ": trajectory too short");
}

inline double sample_or_throw(const FieldStack& st, double x, double t, const char* what) {
    const auto v = st.try_sample(x, t);
    if (!v) throw NodeCrossingError(std::string(what) + ": sample hit an undefined region");
    return *v;
}

/// Continuous (unwrapped) positions for finite differencing across the
/// periodic seam.
inline std::vector<double> continuous_positions(const Trajectory& tr, const UniformGrid& g) {
    std::vector<double> out(tr.size());
    if (tr.size() == 0) return out;
    out[0] = tr.positions[0];
    const double L = g.length();
    for (std::size_t j = 1; j < tr.size(); ++j) {
        double d = tr.positions[j] - tr.positions[j - 1];
        d -= L * std::round(d / L);
        out[j] = out[j - 1] + d;
    }
    return out;
}

inline MaskedField defined_everywhere(std::vector<double> values) {
    MaskedField f(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) f.set(i, values[i]);
    return f;
}

/// Masked field from a pointwise function of the component's log-derivatives.
template <class Fn>
MaskedField from_log_derivatives(const RunContext& run, int comp, std::size_t j, int order,
                                 Fn&& fn) {
    const auto& p = run.polar(comp)[j];
    ComplexField f(p.grid, p.t, p.psi);
    const LogDerivatives ld(f, p.node_mask, order, run.constants().hbar);
    MaskedField out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        if (ld.defined(i)) out.set(i, fn(ld, p, i));
    return out;
}

inline const FieldStack& stack_lap_S(const RunContext& run, int comp) {
    return run.derived_stack("lap_S", comp, [&run, comp](std::size_t j) {
        return from_log_derivatives(run, comp, j, 2,
                                    [](const LogDerivatives& ld, const PolarField&,
                                       std::size_t i) { return ld.lap_S(i); });
    });
}

inline const FieldStack& stack_grad_S(const RunContext& run, int comp) {
    return run.derived_stack("grad_S", comp, [&run, comp](std::size_t j) {
        return from_log_derivatives(run, comp, j, 1,
                                    [](const LogDerivatives& ld, const PolarField&,
                                       std::size_t i) { return ld.grad_S(i); });
    });
}

inline const FieldStack& stack_grad_R(const RunContext& run, int comp) {
    return run.derived_stack("grad_R", comp, [&run, comp](std::size_t j) {
        return from_log_derivatives(run, comp, j, 1,
                                    [](const LogDerivatives& ld, const PolarField& p,
                                       std::size_t i) { return p.R[i] * ld.grad_lnR(i); });
    });
}

/// dS/dt per snapshot as a sampleable stack.
inline const FieldStack& stack_dS_dt(const RunContext& run, int comp) {
    return run.derived_stack("dS_dt", comp, [&run, comp](std::size_t j) {
        if (run.params().model == ModelKind::klein_gordon) {
            const auto& s = run.history().kg(j);
            const auto& p = run.polar(comp)[j];
            MaskedField f(p.size());
            const auto vals = kg_dS_dt(s, p.node_mask, run.constants().hbar);
            for (std::size_t i = 0; i < p.size(); ++i)
                if (!p.node_mask[i]) f.set(i, vals[i]);
            return f;
        }
        return run.dS_dt_fields(comp)[j];
    });
}

/// Gradient of the model's total potential, pointwise analytic plus
/// log-derivative terms, optionally with the external-potential force sign
/// flipped (fault-injection hook for the non-vacuity tests).
inline const FieldStack& stack_grad_W(const RunContext& run, int comp, bool flip_potential) {
    const std::string key = flip_potential ? "grad_W_flipped" : "grad_W";
    return run.derived_stack(key, comp, [&run, comp, flip_potential](std::size_t j) {
        const auto& mp = run.params();
        const auto& k = run.constants();
        const double sgn = flip_potential ? -1.0 : 1.0;
        const double h2 = k.hbar * k.hbar;

        switch (mp.model) {
            case ModelKind::schrodinger: {
                const auto dv = mp.potential.gradient_values(run.grid(), k);
                return from_log_derivatives(
                    run, comp, j, 3,
                    [&, sgn](const LogDerivatives& ld, const PolarField&, std::size_t i) {
                        return sgn * dv[i] - h2 / (2.0 * k.mass) * ld.d_lap_R_over_R(i);
                    });
            }
            case ModelKind::pauli: {
                const PotentialSpec phi =
                    mp.external_field ? mp.external_field->phi : PotentialSpec::zero();
                const auto dphi = phi.gradient_values(run.grid(), k);
                return from_log_derivatives(
                    run, comp, j, 3,
                    [&, sgn](const LogDerivatives& ld, const PolarField&, std::size_t i) {
                        return sgn * k.charge * dphi[i] -
                               h2 / (2.0 * k.mass) * ld.d_lap_R_over_R(i);
                    });
            }
            case ModelKind::nonconstant_mass: {
                const auto dv = mp.potential.gradient_values(run.grid(), k);
                const auto m = mp.mass_profile.values(run.grid(), k);
                const auto dm = mp.mass_profile.gradient_values(run.grid(), k);
                const auto d2m = mp.mass_profile.second_derivative_values(run.grid(), k);
                return from_log_derivatives(
                    run, comp, j, 3,
                    [&, sgn](const LogDerivatives& ld, const PolarField&, std::size_t i) {
                        const double a = ld.grad_lnR(i);
                        const double ap = ld.lap_lnR(i); // a' = (lnR)'' since a = (lnR)'
                        const double b = ld.lap_R_over_R(i);
                        const double bp = ld.d_lap_R_over_R(i);
                        const double mi = m[i];
                        return sgn * dv[i] +
                               0.5 * h2 *
                                   (-bp / mi + b * dm[i] / (mi * mi) +
                                    (d2m[i] * a + dm[i] * ap) / (mi * mi) -
                                    2.0 * dm[i] * dm[i] * a / (mi * mi * mi));
                    });
            }
            case ModelKind::klein_gordon: {
                // W = hbar^2 [ (d2R/dt2)/R / c^2 - R''/R ]; its gradient uses
                // d/dx(d2R/dt2 / R) = (d2(R')/dt2 - (d2R/dt2)(R'/R)) / R with
                // the time differences taken on the R and R' stacks.
                const auto& pf = run.polar(comp);
                const std::size_t last = pf.size() - 1;
                const double dt = run.dt();
                const auto& gradR = stack_grad_R(run, comp);
                const std::size_t a0 = j == 0 ? 0 : (j == last ? last - 2 : j - 1);
                return from_log_derivatives(
                    run, comp, j, 3,
                    [&, a0](const LogDerivatives& ld, const PolarField& p, std::size_t i) {
                        const double d2R =
                            (pf[a0 + 2].R[i] - 2.0 * pf[a0 + 1].R[i] + pf[a0].R[i]) /
                            (dt * dt);
                        const double d2Rp =
                            (gradR.values[a0 + 2][i] - 2.0 * gradR.values[a0 + 1][i] +
                             gradR.values[a0][i]) /
                            (dt * dt);
                        const double aa = ld.grad_lnR(i);
                        const double term_t = (d2Rp - d2R * aa) / p.R[i] / (k.c * k.c);
                        return h2 * (term_t - ld.d_lap_R_over_R(i));
                    });
            }
            case ModelKind::weyl: {
                MaskedField f(run.grid().n);
                for (std::size_t i = 0; i < run.grid().n; ++i) f.set(i, 0.0);
                return f;
            }
        }
        throw Error("stack_grad_W: unreachable");
    });
}

/// dW/dt at interior snapshots by centered differences on the W stack.
inline const FieldStack& stack_dW_dt(const RunContext& run, int comp) {
    return run.derived_stack("dW_dt", comp, [&run, comp](std::size_t j) {
        const auto& W = run.stack_W(comp);
        MaskedField f(run.grid().n);
        if (j == 0 || j + 1 >= W.size()) return f; // undefined at the ends
        const double two_dt = 2.0 * run.dt();
        for (std::size_t i = 0; i < run.grid().n; ++i) {
            if (!W.defined[j - 1][i] || !W.defined[j + 1][i]) continue;
            f.set(i, (W.values[j + 1][i] - W.values[j - 1][i]) / two_dt);
        }
        return f;
    });
}

} // namespace detail

/// Reconstructed amplitude along the curve from the model's along-trajectory
/// log-derivative, trapezoid quadrature:
///   schrodinger / pauli branch i:  dlnR/dt = -lap(S)/2m  (0 external B)
///                                  - (q R_j/2m R_i)(B1 sin xi - B2 cos xi)
///   nonconstant mass:              dlnR/dt = -(lap(S)/m - grad(S) m'/m^2)/2
///   klein_gordon:                  dlnR/dt = -(d2S/dt2 - c^2 lap S)/(2 dS/dt)
inline std::vector<double> density_along_trajectory(const Trajectory& tr, const RunContext& run) {
    detail::require_completed(tr, "density_along_trajectory");
    const auto& mp = run.params();
    const auto& k = run.constants();
    const int comp = tr.component;

    const FieldStack* integrand = nullptr;
    switch (mp.model) {
        case ModelKind::schrodinger:
            integrand = &run.derived_stack("density_exponent", comp, [&](std::size_t j) {
                return detail::from_log_derivatives(
                    run, comp, j, 2, [&](const LogDerivatives& ld, const PolarField&,
                                         std::size_t i) { return ld.lap_S(i) / (2.0 * k.mass); });
            });
            break;
        case ModelKind::pauli:
            integrand = &run.derived_stack("density_exponent", comp, [&](std::size_t j) {
                const int other = 1 - comp;
                const auto& p_other = run.polar(other)[j];
                const auto B = mp.external_field ? mp.external_field->b_values(run.grid())
                                                 : ExternalFieldSpec{}.b_values(run.grid());
                const double sign = comp == 0 ? 1.0 : -1.0;
                return detail::from_log_derivatives(
                    run, comp, j, 2,
                    [&, sign](const LogDerivatives& ld, const PolarField& p, std::size_t i) {
                        // cross = psi_other conj(psi_own) = R_own R_other e^{i xi}
                        // with xi = (S_other - S_own)/hbar. The B1 term keeps
                        // its sign under the component swap; the B2 term flips.
                        const Complex cross = p_other.psi[i] * std::conj(p.psi[i]);
                        const double coupling =
                            k.charge / (2.0 * k.mass) *
                            (B[0][i] * cross.imag() - sign * B[1][i] * cross.real()) /
                            p.R[i];
                        return ld.lap_S(i) / (2.0 * k.mass) + coupling;
                    });
            });
            break;
        case ModelKind::nonconstant_mass:
            integrand = &run.derived_stack("density_exponent", comp, [&](std::size_t j) {
                const auto m = mp.mass_profile.values(run.grid(), k);
                const auto dm = mp.mass_profile.gradient_values(run.grid(), k);
                return detail::from_log_derivatives(
                    run, comp, j, 2,
                    [&](const LogDerivatives& ld, const PolarField&, std::size_t i) {
                        return 0.5 * (ld.lap_S(i) / m[i] -
                                      ld.grad_S(i) * dm[i] / (m[i] * m[i]));
                    });
            });
            break;
        case ModelKind::klein_gordon:
            integrand = &run.derived_stack("density_exponent", comp, [&](std::size_t j) {
                run.history().require_at_least(3, "density_along_trajectory");
                const auto& lapS = detail::stack_lap_S(run, comp);
                const auto& dSdt = detail::stack_dS_dt(run, comp);
                const std::size_t last = run.history().size() - 1;
                const std::size_t a0 = j == 0 ? 0 : (j == last ? last - 2 : j - 1);
                const double dt = run.dt();
                MaskedField f(run.grid().n);
                for (std::size_t i = 0; i < run.grid().n; ++i) {
                    if (!dSdt.defined[a0][i] || !dSdt.defined[a0 + 1][i] ||
                        !dSdt.defined[a0 + 2][i] || !lapS.defined[j][i] || !dSdt.defined[j][i])
                        continue;
                    // d2S/dt2 via differences of the pointwise-exact dS/dt
                    double d2S;
                    if (j == 0)
                        d2S = (-3.0 * dSdt.values[0][i] + 4.0 * dSdt.values[1][i] -
                               dSdt.values[2][i]) /
                              (2.0 * dt);
                    else if (j == last)
                        d2S = (3.0 * dSdt.values[last][i] - 4.0 * dSdt.values[last - 1][i] +
                               dSdt.values[last - 2][i]) /
                              (2.0 * dt);
                    else
                        d2S = (dSdt.values[j + 1][i] - dSdt.values[j - 1][i]) / (2.0 * dt);
                    f.set(i, (d2S - k.c * k.c * lapS.values[j][i]) /
                                 (2.0 * dSdt.values[j][i]));
                }
                return f;
            });
            break;
        case ModelKind::weyl:
            throw Error("density_along_trajectory: not defined for the first-order spinor model");
    }

    std::vector<double> out(tr.size());
    const double R0 = tr.samples[0].R;
    if (!std::isfinite(R0) || R0 <= 0.0)
        throw NodeCrossingError("density_along_trajectory: amplitude undefined at the seed");
    double accum = 0.0;
    double prev = detail::sample_or_throw(*integrand, tr.positions[0], tr.times[0],
                                          "density_along_trajectory");
    out[0] = R0;
    for (std::size_t j = 1; j < tr.size(); ++j) {
        const double cur = detail::sample_or_throw(*integrand, tr.positions[j], tr.times[j],
                                                   "density_along_trajectory");
        accum += 0.5 * (prev + cur) * (tr.times[j] - tr.times[j - 1]);
        out[j] = R0 * std::exp(-accum);
        prev = cur;
    }
    return out;
}

/// Accumulated action along the curve: S(x0,t0) plus the trapezoid integral
/// of the Lagrangian (grad S)^2/2m(x) - W, with W the model's total
/// potential. Defined for the first-order-in-time scalar and spinor models.
inline std::vector<double> action_along_trajectory(const Trajectory& tr, const RunContext& run) {
    detail::require_completed(tr, "action_along_trajectory");
    const auto& mp = run.params();
    if (mp.model == ModelKind::klein_gordon || mp.model == ModelKind::weyl)
        throw Error("action_along_trajectory: defined for the Schrodinger-family models only");
    const auto& k = run.constants();
    const int comp = tr.component;
    const auto& gradS = detail::stack_grad_S(run, comp);
    const auto m = mp.mass_profile.values(run.grid(), k);

    const double S0 = tr.samples[0].S;
    if (!std::isfinite(S0))
        throw NodeCrossingError("action_along_trajectory: action undefined at the seed");

    auto lagrangian_at = [&](std::size_t j) {
        const double g = detail::sample_or_throw(gradS, tr.positions[j], tr.times[j],
                                                 "action_along_trajectory");
        const double w = tr.samples[j].W;
        if (!std::isfinite(w))
            throw NodeCrossingError("action_along_trajectory: total potential undefined");
        double mass = k.mass;
        if (mp.model == ModelKind::nonconstant_mass) {
            const SpatialSamples ms{&run.grid(), &m, nullptr};
            mass = *ms.try_at(tr.positions[j]);
        }
        return g * g / (2.0 * mass) - w;
    };

    std::vector<double> out(tr.size());
    out[0] = S0;
    double prev = lagrangian_at(0);
    double accum = 0.0;
    for (std::size_t j = 1; j < tr.size(); ++j) {
        const double cur = lagrangian_at(j);
        accum += 0.5 * (prev + cur) * (tr.times[j] - tr.times[j - 1]);
        out[j] = S0 + accum;
        prev = cur;
    }
    return out;
}

/// Trajectory-level force-law residual:
///   schrodinger / pauli: |x'' + grad(W)/m|
///   nonconstant mass:    |d(m(x) x')/dt + grad(Omega) - x'^2 m'/2|
///   klein_gordon:        |x'' (dS/dt)^2 + (c^4/2)(grad W + x' dW/dt / c^2)|
/// Accelerations are centered second differences over the recorded points.
inline ResidualNorm newton_residual(const Trajectory& tr, const RunContext& run,
                                    bool flip_potential_force = false) {
    detail::require_completed(tr, "newton_residual");
    const auto& mp = run.params();
    const auto& k = run.constants();
    const int comp = tr.component;
    const auto pos = detail::continuous_positions(tr, run.grid());
    const double dt = tr.times[1] - tr.times[0];
    const auto& gradW = detail::stack_grad_W(run, comp, flip_potential_force);

    ResidualNorm rn;
    auto take = [&rn](double residual, double scale) {
        rn.linf = std::max(rn.linf, std::abs(residual));
        rn.scale = std::max(rn.scale, scale);
    };

    switch (mp.model) {
        case ModelKind::schrodinger:
        case ModelKind::pauli: {
            for (std::size_t j = 1; j + 1 < tr.size(); ++j) {
                const double acc = (pos[j + 1] - 2.0 * pos[j] + pos[j - 1]) / (dt * dt);
                const double f = detail::sample_or_throw(gradW, tr.positions[j], tr.times[j],
                                                         "newton_residual") /
                                 k.mass;
                take(acc + f, std::max(std::abs(acc), std::abs(f)));
            }
            break;
        }
        case ModelKind::nonconstant_mass: {
            const auto m = mp.mass_profile.values(run.grid(), k);
            const auto dm = mp.mass_profile.gradient_values(run.grid(), k);
            const SpatialSamples ms{&run.grid(), &m, nullptr};
            const SpatialSamples dms{&run.grid(), &dm, nullptr};
            std::vector<double> momentum(tr.size(),
                                         std::numeric_limits<double>::quiet_NaN());
            std::vector<double> vel(tr.size(), std::numeric_limits<double>::quiet_NaN());
            for (std::size_t j = 1; j + 1 < tr.size(); ++j) {
                vel[j] = (pos[j + 1] - pos[j - 1]) / (2.0 * dt);
                momentum[j] = *ms.try_at(tr.positions[j]) * vel[j];
            }
            for (std::size_t j = 2; j + 2 < tr.size(); ++j) {
                const double dp_dt = (momentum[j + 1] - momentum[j - 1]) / (2.0 * dt);
                const double grad_omega = detail::sample_or_throw(
                    gradW, tr.positions[j], tr.times[j], "newton_residual");
                const double mass_force =
                    0.5 * vel[j] * vel[j] * *dms.try_at(tr.positions[j]);
                take(dp_dt + grad_omega - mass_force,
                     std::max({std::abs(dp_dt), std::abs(grad_omega), std::abs(mass_force)}));
            }
            break;
        }
        case ModelKind::klein_gordon: {
            const auto& dSdt = detail::stack_dS_dt(run, comp);
            const auto& dWdt = detail::stack_dW_dt(run, comp);
            for (std::size_t j = 2; j + 2 < tr.size(); ++j) {
                const double acc = (pos[j + 1] - 2.0 * pos[j] + pos[j - 1]) / (dt * dt);
                const double v = (pos[j + 1] - pos[j - 1]) / (2.0 * dt);
                const double T = detail::sample_or_throw(dSdt, tr.positions[j], tr.times[j],
                                                         "newton_residual");
                const double gw = detail::sample_or_throw(gradW, tr.positions[j], tr.times[j],
                                                          "newton_residual");
                const double wt = detail::sample_or_throw(dWdt, tr.positions[j], tr.times[j],
                                                          "newton_residual");
                const double c4 = k.c * k.c * k.c * k.c;
                const double lhs = acc * T * T;
                const double rhs = -(c4 / 2.0) * (gw + v * wt / (k.c * k.c));
                take(lhs - rhs, std::max(std::abs(lhs), std::abs(rhs)));
            }
            break;
        }
        case ModelKind::weyl:
            throw Error("newton_residual: not defined for the first-order spinor model");
    }
    return rn;
}

/// Residual of the branch-1 amplitude transport law along a component-0
/// trajectory,
///   dR1/dt + R1 lap(S1)/2m + (q R2/2m)(B1 sin xi - B2 cos xi) = 0,
/// with xi = (S2-S1)/hbar evaluated from the spinor product. Setting
/// `include_coupling` to false drops the B term (ablation probe).
inline ResidualNorm pauli_dR1_dt_residual(const Trajectory& tr, const RunContext& run,
                                          bool include_coupling = true) {
    detail::require_completed(tr, "pauli_dR1_dt_residual");
    if (run.params().model != ModelKind::pauli)
        throw Error("pauli_dR1_dt_residual: model is not spin-coupled");
    const auto& k = run.constants();
    const auto& lapS1 = detail::stack_lap_S(run, 0);
    const auto& R1 = run.stack_R(0);

    const auto& coupling = run.derived_stack("pauli_coupling", 0, [&](std::size_t j) {
        const auto& p1 = run.polar(0)[j];
        const auto& p2 = run.polar(1)[j];
        const auto B = run.params().external_field
                           ? run.params().external_field->b_values(run.grid())
                           : ExternalFieldSpec{}.b_values(run.grid());
        MaskedField f(p1.size());
        for (std::size_t i = 0; i < p1.size(); ++i) {
            if (p1.node_mask[i]) continue;
            // R2 sin xi = Im(psi2 conj(psi1))/R1, R2 cos xi = Re(...)/R1
            const Complex cross = p2.psi[i] * std::conj(p1.psi[i]);
            f.set(i, k.charge / (2.0 * k.mass) *
                         (B[0][i] * cross.imag() - B[1][i] * cross.real()) / p1.R[i]);
        }
        return f;
    });

    ResidualNorm rn;
    std::vector<double> r1(tr.size());
    for (std::size_t j = 0; j < tr.size(); ++j)
        r1[j] = detail::sample_or_throw(R1, tr.positions[j], tr.times[j],
                                        "pauli_dR1_dt_residual");
    const double dt = tr.times[1] - tr.times[0];
    for (std::size_t j = 1; j + 1 < tr.size(); ++j) {
        const double dR_dt = (r1[j + 1] - r1[j - 1]) / (2.0 * dt);
        const double spread =
            r1[j] *
            detail::sample_or_throw(lapS1, tr.positions[j], tr.times[j],
                                    "pauli_dR1_dt_residual") /
            (2.0 * k.mass);
        const double c = include_coupling
                             ? detail::sample_or_throw(coupling, tr.positions[j], tr.times[j],
                                                       "pauli_dR1_dt_residual")
                             : 0.0;
        const double res = dR_dt + spread + c;
        rn.linf = std::max(rn.linf, std::abs(res));
        rn.scale = std::max({rn.scale, std::abs(dR_dt), std::abs(spread), std::abs(c)});
    }
    return rn;
}

/// Residual of the action equation with the amplitude term reconstructed
/// from the curve's own history, evaluated at every recorded time along the
/// trajectory:
///   dS/dt|_t + (grad S)^2/2m + V
///     - (hbar^2/2m) [ lap lnR_0 + (grad lnR_0)^2 - grad lnR_0 I1/m
///                     + I1^2/4m^2 - I2/2m ]
/// with I1 = int grad(lap S) dt', I2 = int grad^4 S dt' along the curve and
/// the reference log-amplitude derivatives taken at the seed. Exact at t_0
/// up to the direct equation residual; the omitted flow-Jacobian terms grow
/// like t^2.
inline std::vector<double> s_equation_residuals(const Trajectory& tr, const RunContext& run) {
    detail::require_completed(tr, "s_equation_residuals");
    const auto& mp = run.params();
    if (mp.model != ModelKind::schrodinger)
        throw Error("s_equation_residuals: defined for the constant-mass scalar model");
    const auto& k = run.constants();
    const double m = k.mass;
    const double h2_2m = k.hbar * k.hbar / (2.0 * m);

    const auto& gradS = detail::stack_grad_S(run, 0);
    const auto& dSdt = detail::stack_dS_dt(run, 0);
    const auto& grad3S = run.derived_stack("grad3_S", 0, [&](std::size_t j) {
        return detail::from_log_derivatives(run, 0, j, 3,
                                            [](const LogDerivatives& ld, const PolarField&,
                                               std::size_t i) { return ld.grad3_S(i); });
    });
    const auto& grad4S = run.derived_stack("grad4_S", 0, [&](std::size_t j) {
        return detail::from_log_derivatives(run, 0, j, 4,
                                            [](const LogDerivatives& ld, const PolarField&,
                                               std::size_t i) { return ld.grad4_S(i); });
    });
    const auto& grad_lnR = run.derived_stack("grad_lnR", 0, [&](std::size_t j) {
        return detail::from_log_derivatives(run, 0, j, 1,
                                            [](const LogDerivatives& ld, const PolarField&,
                                               std::size_t i) { return ld.grad_lnR(i); });
    });
    const auto& lap_lnR = run.derived_stack("lap_lnR", 0, [&](std::size_t j) {
        return detail::from_log_derivatives(run, 0, j, 2,
                                            [](const LogDerivatives& ld, const PolarField&,
                                               std::size_t i) { return ld.lap_lnR(i); });
    });

    const double x0 = tr.positions[0];
    const double t0 = tr.times[0];
    const double lnR0_x = detail::sample_or_throw(grad_lnR, x0, t0, "s_equation_residuals");
    const double lnR0_xx = detail::sample_or_throw(lap_lnR, x0, t0, "s_equation_residuals");
    const auto v_values = mp.potential.values(run.grid(), k);
    const SpatialSamples v_interp{&run.grid(), &v_values, nullptr};

    std::vector<double> out(tr.size());
    double I1 = 0.0, I2 = 0.0;
    double prev3 = detail::sample_or_throw(grad3S, x0, t0, "s_equation_residuals");
    double prev4 = detail::sample_or_throw(grad4S, x0, t0, "s_equation_residuals");
    for (std::size_t j = 0; j < tr.size(); ++j) {
        const double x = tr.positions[j];
        const double t = tr.times[j];
        if (j > 0) {
            const double cur3 = detail::sample_or_throw(grad3S, x, t, "s_equation_residuals");
            const double cur4 = detail::sample_or_throw(grad4S, x, t, "s_equation_residuals");
            const double h = tr.times[j] - tr.times[j - 1];
            I1 += 0.5 * (prev3 + cur3) * h;
            I2 += 0.5 * (prev4 + cur4) * h;
            prev3 = cur3;
            prev4 = cur4;
        }
        const double st = detail::sample_or_throw(dSdt, x, t, "s_equation_residuals");
        const double sx = detail::sample_or_throw(gradS, x, t, "s_equation_residuals");
        const double reconstructed_lapR_over_R = lnR0_xx + lnR0_x * lnR0_x -
                                                 lnR0_x * I1 / m + I1 * I1 / (4.0 * m * m) -
                                                 I2 / (2.0 * m);
        out[j] = st + sx * sx / (2.0 * m) + *v_interp.try_at(x) -
                 h2_2m * reconstructed_lapR_over_R;
    }
    return out;
}

/// Along-curve residuals of the characteristic combinations of the 1-D Dirac
/// system: one amplitude-type and one action-type combination per family,
/// derived as left eigenvectors of the quasilinear system
///   dR1/dt - c sin(chi) dR2/dx + (c/hbar) cos(chi) R2 dS2/dx = 0
///   dR2/dt - c sin(chi) dR1/dx - (c/hbar) cos(chi) R1 dS1/dx = 0
///   dS1/dt - c sin(chi) (R2/R1) dS2/dx - (hbar c cos(chi)/R1) dR2/dx + mc^2 = 0
///   dS2/dt - c sin(chi) (R1/R2) dS1/dx + (hbar c cos(chi)/R2) dR1/dx - mc^2 = 0
/// with chi = (S1-S2)/hbar - pi/2.
///
/// Per-component family (curves dx/dt = +-c sin chi):
///   +: d(R1-R2)/dt + (c/hbar) cos(chi) [R1 S1' + R2 S2'] = 0
///      dS1/dt - (R2/R1) dS2/dt - (hbar c cos(chi)/R1)(R1' + R2') + (1 + R2/R1) mc^2 = 0
///   -: d(R1+R2)/dt - (c/hbar) cos(chi) [R1 S1' - R2 S2'] = 0
///      dS1/dt + (R2/R1) dS2/dt + (hbar c cos(chi)/R1)(R1' - R2') + (1 - R2/R1) mc^2 = 0
/// Whole-system family (curves dx/dt = +-c):
///   +: dR1/dt - sin(chi) dR2/dt + (cos(chi) R2/hbar)(dS2/dt - mc^2) = 0
///      dS1/dt - (hbar cos(chi)/R1) dR2/dt - sin(chi)(R2/R1) dS2/dt + (1 + sin(chi) R2/R1) mc^2 = 0
///   -: dR1/dt + sin(chi) dR2/dt - (cos(chi) R2/hbar)(dS2/dt - mc^2) = 0
///      dS1/dt + (hbar cos(chi)/R1) dR2/dt + sin(chi)(R2/R1) dS2/dt + (1 - sin(chi) R2/R1) mc^2 = 0
struct WeylFormResiduals {
    ResidualNorm amplitude;
    ResidualNorm action;
};

inline WeylFormResiduals weyl_characteristic_form_residuals(const Trajectory& tr,
                                                            const RunContext& run,
                                                            WeylFamily family) {
    detail::require_completed(tr, "weyl_characteristic_form_residuals");
    if (run.params().model != ModelKind::weyl)
        throw Error("weyl_characteristic_form_residuals: model is not the 1-D Dirac system");
    const auto& k = run.constants();
    const double mc2 = k.mass * k.c * k.c;
    const double hbar = k.hbar;
    const double c = k.c;

    // pointwise trig of chi from the spinor product, off either node mask
    auto trig_stack = [&](const char* key, bool want_sin) {
        return &run.derived_stack(key, 0, [&run, want_sin](std::size_t j) {
            const auto& p1 = run.polar(0)[j];
            const auto& p2 = run.polar(1)[j];
            MaskedField f(p1.size());
            for (std::size_t i = 0; i < p1.size(); ++i) {
                if (p1.node_mask[i] || p2.node_mask[i]) continue;
                // prod/denom = e^{i(S1-S2)/hbar}; chi shifts the angle by -pi/2,
                // so sin(chi) = -cos((S1-S2)/hbar), cos(chi) = sin((S1-S2)/hbar)
                const Complex prod = p1.psi[i] * std::conj(p2.psi[i]);
                const double denom = p1.R[i] * p2.R[i];
                f.set(i, want_sin ? -prod.real() / denom : prod.imag() / denom);
            }
            return f;
        });
    };
    const FieldStack* sin_chi = trig_stack("weyl_sin_chi", true);
    const FieldStack* cos_chi = trig_stack("weyl_cos_chi", false);
    const auto& R1 = run.stack_R(0);
    const auto& R2 = run.stack_R(1);
    const auto& S1 = run.stack_S(0);
    const auto& S2 = run.stack_S(1);
    const auto& gS1 = detail::stack_grad_S(run, 0);
    const auto& gS2 = detail::stack_grad_S(run, 1);
    const auto& gR1 = detail::stack_grad_R(run, 0);
    const auto& gR2 = detail::stack_grad_R(run, 1);

    const std::size_t npts = tr.size();
    auto series = [&](const FieldStack& st, const char* what) {
        std::vector<double> v(npts);
        for (std::size_t j = 0; j < npts; ++j)
            v[j] = detail::sample_or_throw(st, tr.positions[j], tr.times[j], what);
        return v;
    };
    const char* what = "weyl_characteristic_form_residuals";
    const auto r1 = series(R1, what);
    const auto r2 = series(R2, what);
    const auto s1 = unwrap_series(series(S1, what), 2.0 * std::numbers::pi * hbar);
    const auto s2 = unwrap_series(series(S2, what), 2.0 * std::numbers::pi * hbar);
    const auto sc = series(*sin_chi, what);
    const auto cc = series(*cos_chi, what);
    const auto s1x = series(gS1, what);
    const auto s2x = series(gS2, what);
    const auto r1x = series(gR1, what);
    const auto r2x = series(gR2, what);

    const double dt = tr.times[1] - tr.times[0];
    auto ddt = [&](const std::vector<double>& f, std::size_t j) {
        return (f[j + 1] - f[j - 1]) / (2.0 * dt);
    };
    const bool plus_family = tr.component == 0;

    WeylFormResiduals out;
    auto take = [](ResidualNorm& rn, double res, std::initializer_list<double> terms) {
        rn.linf = std::max(rn.linf, std::abs(res));
        for (double t : terms) rn.scale = std::max(rn.scale, std::abs(t));
    };

    for (std::size_t j = 1; j + 1 < npts; ++j) {
        if (family == WeylFamily::per_component) {
            if (plus_family) {
                const double lhs = ddt(r1, j) - ddt(r2, j);
                const double rhs = -(c / hbar) * cc[j] * (r1[j] * s1x[j] + r2[j] * s2x[j]);
                take(out.amplitude, lhs - rhs, {lhs, rhs});
                const double a = ddt(s1, j) - (r2[j] / r1[j]) * ddt(s2, j);
                const double b = (hbar * c * cc[j] / r1[j]) * (r1x[j] + r2x[j]) -
                                 (1.0 + r2[j] / r1[j]) * mc2;
                take(out.action, a - b, {a, b, mc2});
            } else {
                const double lhs = ddt(r1, j) + ddt(r2, j);
                const double rhs = (c / hbar) * cc[j] * (r1[j] * s1x[j] - r2[j] * s2x[j]);
                take(out.amplitude, lhs - rhs, {lhs, rhs});
                const double a = ddt(s1, j) + (r2[j] / r1[j]) * ddt(s2, j);
                const double b = -(hbar * c * cc[j] / r1[j]) * (r1x[j] - r2x[j]) -
                                 (1.0 - r2[j] / r1[j]) * mc2;
                take(out.action, a - b, {a, b, mc2});
            }
        } else {
            if (plus_family) {
                const double res_a = ddt(r1, j) - sc[j] * ddt(r2, j) +
                                     (cc[j] * r2[j] / hbar) * (ddt(s2, j) - mc2);
                take(out.amplitude, res_a, {ddt(r1, j), sc[j] * ddt(r2, j),
                                            (cc[j] * r2[j] / hbar) * (ddt(s2, j) - mc2)});
                const double res_s = ddt(s1, j) - (hbar * cc[j] / r1[j]) * ddt(r2, j) -
                                     sc[j] * (r2[j] / r1[j]) * ddt(s2, j) +
                                     (1.0 + sc[j] * r2[j] / r1[j]) * mc2;
                take(out.action, res_s, {ddt(s1, j), mc2, sc[j] * (r2[j] / r1[j]) * ddt(s2, j)});
            } else {
                const double res_a = ddt(r1, j) + sc[j] * ddt(r2, j) -
                                     (cc[j] * r2[j] / hbar) * (ddt(s2, j) - mc2);
                take(out.amplitude, res_a, {ddt(r1, j), sc[j] * ddt(r2, j),
                                            (cc[j] * r2[j] / hbar) * (ddt(s2, j) - mc2)});
                const double res_s = ddt(s1, j) + (hbar * cc[j] / r1[j]) * ddt(r2, j) +
                                     sc[j] * (r2[j] / r1[j]) * ddt(s2, j) +
                                     (1.0 - sc[j] * r2[j] / r1[j]) * mc2;
                take(out.action, res_s, {ddt(s1, j), mc2, sc[j] * (r2[j] / r1[j]) * ddt(s2, j)});
            }
        }
    }
    return out;
}

} // namespace qtraj
