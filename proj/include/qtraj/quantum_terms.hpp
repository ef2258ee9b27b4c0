#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "qtraj/derivatives.hpp"
#include "qtraj/errors.hpp"
#include "qtraj/field.hpp"
#include "qtraj/polar.hpp"
#include "qtraj/potential.hpp"

namespace qtraj {

enum class TotalPotentialModel { schrodinger, nonconstant_mass, klein_gordon };

/// Q = -(hbar^2/2m) R''/R, undefined on the node mask (plus halo).
inline MaskedField quantum_potential(const PolarField& p, const PhysicalConstants& k,
                                     int halo = kNodeHalo) {
    ComplexField f(p.grid, p.t, p.psi);
    const LogDerivatives ld(f, p.node_mask, 2, k.hbar, halo);
    MaskedField q(p.size());
    const double coef = -k.hbar * k.hbar / (2.0 * k.mass);
    for (std::size_t i = 0; i < p.size(); ++i)
        if (ld.defined(i)) q.set(i, coef * ld.lap_R_over_R(i));
    return q;
}

/// Total potential whose gradient drives the trajectory-level Newton law.
///   schrodinger:       W = V - (hbar^2/2m) R''/R
///   nonconstant mass:  O = V - (hbar^2/2m(x)) R''/R + hbar^2 m' R' / (2 m(x)^2 R)
///   klein_gordon:      W = hbar^2 [d2R/dt2 / c^2 - R''] / R   (free particle, V absent)
/// The KG branch needs the second time derivative of R, supplied by the
/// caller from snapshot history.
inline MaskedField total_potential(const PolarField& p, const PotentialSpec& V,
                                   const PhysicalConstants& k, TotalPotentialModel model,
                                   const MassSpec* mass = nullptr,
                                   const std::vector<double>* d2R_dt2 = nullptr,
                                   int halo = kNodeHalo) {
    ComplexField f(p.grid, p.t, p.psi);
    const LogDerivatives ld(f, p.node_mask, 2, k.hbar, halo);
    MaskedField w(p.size());
    const double h2 = k.hbar * k.hbar;

    switch (model) {
        case TotalPotentialModel::schrodinger: {
            const auto v = V.values(p.grid, k);
            for (std::size_t i = 0; i < p.size(); ++i)
                if (ld.defined(i)) w.set(i, v[i] - h2 / (2.0 * k.mass) * ld.lap_R_over_R(i));
            break;
        }
        case TotalPotentialModel::nonconstant_mass: {
            const auto v = V.values(p.grid, k);
            const MassSpec ms = mass ? *mass : MassSpec::constant();
            const auto m = ms.values(p.grid, k);
            const auto dm = ms.gradient_values(p.grid, k);
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (!ld.defined(i)) continue;
                const double b = ld.lap_R_over_R(i);
                const double a = ld.grad_lnR(i); // R'/R
                w.set(i, v[i] - h2 / (2.0 * m[i]) * b + h2 * dm[i] * a / (2.0 * m[i] * m[i]));
            }
            break;
        }
        case TotalPotentialModel::klein_gordon: {
            if (d2R_dt2 == nullptr)
                throw InsufficientHistoryError(
                    "total_potential: klein_gordon needs d2R/dt2 from at least 3 snapshots");
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (!ld.defined(i)) continue;
                w.set(i, h2 * ((*d2R_dt2)[i] / (k.c * k.c * p.R[i]) - ld.lap_R_over_R(i)));
            }
            break;
        }
    }
    return w;
}

/// Quantum flux j = R^2 grad(S) / m, evaluated pointwise as
/// hbar*Im(conj(psi) psi') / m(x). The R^2 damping keeps it well defined
/// everywhere, nodes included.
inline std::vector<double> flux(const PolarField& p, const PhysicalConstants& k,
                                const MassSpec* mass = nullptr) {
    const auto dpsi = spectral_derivative(p.psi, p.grid, 1);
    std::vector<double> j(p.size());
    if (mass && mass->kind == MassSpec::Kind::tabulated) {
        const auto m = mass->values(p.grid, k);
        for (std::size_t i = 0; i < p.size(); ++i)
            j[i] = k.hbar * std::imag(std::conj(p.psi[i]) * dpsi[i]) / m[i];
    } else {
        for (std::size_t i = 0; i < p.size(); ++i)
            j[i] = k.hbar * std::imag(std::conj(p.psi[i]) * dpsi[i]) / k.mass;
    }
    return j;
}

/// L2 norm (rectangle rule) of d(R^2)/dt + div j over three equally spaced
/// snapshots, evaluated off the union of the node masks.
inline double continuity_residual(const PolarField& prev, const PolarField& now,
                                  const PolarField& next, const PhysicalConstants& k,
                                  const MassSpec* mass = nullptr) {
    if (prev.grid != now.grid || now.grid != next.grid)
        throw GridMismatchError("continuity_residual: snapshots on different grids");
    const double dt1 = now.t - prev.t;
    const double dt2 = next.t - now.t;
    if (!(dt1 > 0.0) || std::abs(dt2 - dt1) > 1e-9 * std::abs(dt1))
        throw GridMismatchError("continuity_residual: snapshots not equally spaced in time");

    const auto div_j = gradient(flux(now, k, mass), now.grid);
    double sum = 0.0;
    for (std::size_t i = 0; i < now.size(); ++i) {
        if (prev.node_mask[i] || now.node_mask[i] || next.node_mask[i]) continue;
        const double drho_dt =
            (next.R[i] * next.R[i] - prev.R[i] * prev.R[i]) / (dt1 + dt2);
        const double r = drho_dt + div_j[i];
        sum += r * r;
    }
    return std::sqrt(sum * now.grid.dx());
}

/// Polar-form Lagrangian density
///   L = (hbar^2/2m) R R'' - R^2 (grad S)^2 / 2m - R^2 dS/dt - R^2 V
/// with dS/dt supplied from history. Its variational equations are the
/// continuity and quantum Hamilton-Jacobi pair.
inline MaskedField lagrangian_density(const PolarField& p, const MaskedField& dS_dt,
                                      const PotentialSpec& V, const PhysicalConstants& k,
                                      int halo = kNodeHalo) {
    ComplexField f(p.grid, p.t, p.psi);
    const LogDerivatives ld(f, p.node_mask, 2, k.hbar, halo);
    const auto v = V.values(p.grid, k);
    MaskedField out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!ld.defined(i) || !dS_dt.defined[i]) continue;
        const double R2 = p.R[i] * p.R[i];
        const double gS = ld.grad_S(i);
        const double val = k.hbar * k.hbar / (2.0 * k.mass) * R2 * ld.lap_R_over_R(i) -
                           R2 * gS * gS / (2.0 * k.mass) - R2 * dS_dt.values[i] - R2 * v[i];
        out.set(i, val);
    }
    return out;
}

/// Energy density (hbar^2/2m)(grad R)^2 + R^2 (grad S)^2 / 2m + R^2 V.
/// Each term carries an R^2 damping, so masked points contribute nothing to
/// the spatial integral at node-threshold accuracy.
inline MaskedField hamiltonian_density(const PolarField& p, const PotentialSpec& V,
                                       const PhysicalConstants& k, int halo = kNodeHalo) {
    ComplexField f(p.grid, p.t, p.psi);
    const LogDerivatives ld(f, p.node_mask, 2, k.hbar, halo);
    const auto v = V.values(p.grid, k);
    MaskedField out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!ld.defined(i)) continue;
        const double R2 = p.R[i] * p.R[i];
        const double gR = p.R[i] * ld.grad_lnR(i);
        const double gS = ld.grad_S(i);
        out.set(i, k.hbar * k.hbar / (2.0 * k.mass) * gR * gR +
                       R2 * gS * gS / (2.0 * k.mass) + R2 * v[i]);
    }
    return out;
}

/// Spatial integral treating undefined points as zero (their integrand is
/// R^2-damped below the node threshold).
inline double integrate_masked(const MaskedField& f, const UniformGrid& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f.defined[i]) s += f.values[i];
    return s * g.dx();
}

/// Euler-Lagrange residuals of the polar-form action, assembled from the
/// variational terms over three consecutive snapshots:
///   first:  d/dt(-R^2) + div(-R^2 grad S / m)            (variation in S)
///   second: -2R dS/dt - R (grad S)^2/m - 2RV + (hbar^2/m) lap R  (variation in R)
/// The laplacian of R in the second residual is taken with the plain spectral
/// operator, a different route than the log-derivative form used by the
/// direct equation residuals.
struct EulerLagrangeResiduals {
    MaskedField in_S;
    MaskedField in_R;
};

inline EulerLagrangeResiduals euler_lagrange_residuals(const PolarField& prev,
                                                       const PolarField& now,
                                                       const PolarField& next,
                                                       const PotentialSpec& V,
                                                       const PhysicalConstants& k,
                                                       int halo = kNodeHalo) {
    if (prev.grid != now.grid || now.grid != next.grid)
        throw GridMismatchError("euler_lagrange_residuals: snapshots on different grids");
    const double two_dt = next.t - prev.t;

    ComplexField f(now.grid, now.t, now.psi);
    const LogDerivatives ld(f, now.node_mask, 2, k.hbar, halo);
    const auto v = V.values(now.grid, k);

    // conjugate momentum of S is -R^2; its flux term is -R^2 grad S / m
    std::vector<double> momentum_flux(now.size());
    {
        const auto dpsi = spectral_derivative(now.psi, now.grid, 1);
        for (std::size_t i = 0; i < now.size(); ++i)
            momentum_flux[i] = -k.hbar * std::imag(std::conj(now.psi[i]) * dpsi[i]) / k.mass;
    }
    const auto div_flux = gradient(momentum_flux, now.grid);
    const auto lap_R = laplacian(now.R, now.grid);

    EulerLagrangeResiduals out{MaskedField(now.size()), MaskedField(now.size())};
    for (std::size_t i = 0; i < now.size(); ++i) {
        if (prev.node_mask[i] || next.node_mask[i] || !ld.defined(i)) continue;
        const double dPi_S_dt =
            -(next.R[i] * next.R[i] - prev.R[i] * prev.R[i]) / two_dt;
        out.in_S.set(i, dPi_S_dt + div_flux[i]);

        const double dS_dt = (next.S[i] - prev.S[i]) / two_dt;
        const double gS = ld.grad_S(i);
        out.in_R.set(i, -2.0 * now.R[i] * dS_dt - now.R[i] * gS * gS / k.mass -
                            2.0 * now.R[i] * v[i] +
                            k.hbar * k.hbar / k.mass * lap_R[i]);
    }
    return out;
}

} // namespace qtraj
