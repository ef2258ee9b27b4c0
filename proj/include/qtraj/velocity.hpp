#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "qtraj/derivatives.hpp"
#include "qtraj/field.hpp"
#include "qtraj/grid.hpp"
#include "qtraj/interp.hpp"
#include "qtraj/polar.hpp"
#include "qtraj/potential.hpp"
#include "qtraj/propagators.hpp"

namespace qtraj {

/// Characteristic velocity of one model branch at one time stamp.
struct VelocityField {
    ModelKind model = ModelKind::schrodinger;
    int component = 0;
    UniformGrid grid;
    double t = 0.0;
    std::vector<double> v;
    std::vector<std::uint8_t> defined;
};

/// v = grad(S)/m off the node mask (plus halo).
inline VelocityField velocity_schrodinger(const PolarField& p, const PhysicalConstants& k,
                                          int halo = kNodeHalo) {
    ComplexField f(p.grid, p.t, p.psi);
    const LogDerivatives ld(f, p.node_mask, 1, k.hbar, halo);
    VelocityField out{ModelKind::schrodinger, 0, p.grid, p.t,
                      std::vector<double>(p.size(), 0.0), ld.usable()};
    for (std::size_t i = 0; i < p.size(); ++i)
        if (out.defined[i]) out.v[i] = ld.grad_S(i) / k.mass;
    return out;
}

/// v = grad(S)/m(x).
inline VelocityField velocity_nonconstant_mass(const PolarField& p, const MassSpec& mass,
                                               const PhysicalConstants& k,
                                               int halo = kNodeHalo) {
    ComplexField f(p.grid, p.t, p.psi);
    const LogDerivatives ld(f, p.node_mask, 1, k.hbar, halo);
    const auto m = mass.values(p.grid, k);
    VelocityField out{ModelKind::nonconstant_mass, 0, p.grid, p.t,
                      std::vector<double>(p.size(), 0.0), ld.usable()};
    for (std::size_t i = 0; i < p.size(); ++i)
        if (out.defined[i]) out.v[i] = ld.grad_S(i) / m[i];
    return out;
}

/// One velocity per spinor branch, v_i = grad(S_i)/m, masks per component.
inline std::array<VelocityField, 2> velocity_pauli(const PolarField& up, const PolarField& down,
                                                   const PhysicalConstants& k,
                                                   int halo = kNodeHalo) {
    auto one = [&](const PolarField& p, int comp) {
        VelocityField vf = velocity_schrodinger(p, k, halo);
        vf.model = ModelKind::pauli;
        vf.component = comp;
        return vf;
    };
    return {one(up, 0), one(down, 1)};
}

/// v = -c^2 grad(S) / dS/dt. Points where |dS/dt| falls below
/// eps_denominator * (m c^2) are excluded from the defined mask. No |v| <= c
/// clamp is applied: the characteristic speed of this model is unbounded.
inline VelocityField velocity_klein_gordon(const PolarField& p, const std::vector<double>& dS_dt,
                                           const PhysicalConstants& k, int halo = kNodeHalo,
                                           double eps_denominator = 1e-6) {
    ComplexField f(p.grid, p.t, p.psi);
    const LogDerivatives ld(f, p.node_mask, 1, k.hbar, halo);
    VelocityField out{ModelKind::klein_gordon, 0, p.grid, p.t,
                      std::vector<double>(p.size(), 0.0), ld.usable()};
    double scale = k.mass * k.c * k.c;
    if (scale == 0.0) {
        for (std::size_t i = 0; i < p.size(); ++i)
            if (out.defined[i]) scale = std::max(scale, std::abs(dS_dt[i]));
    }
    const double floor = eps_denominator * scale;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!out.defined[i]) continue;
        if (std::abs(dS_dt[i]) <= floor) {
            out.defined[i] = 0;
            continue;
        }
        out.v[i] = -k.c * k.c * ld.grad_S(i) / dS_dt[i];
    }
    return out;
}

/// dS/dt of the second-order-in-time model, pointwise from the stored time
/// derivative: hbar * Im(dpsi_dt / psi). Valid off the node mask.
inline std::vector<double> kg_dS_dt(const KGState& s, const std::vector<std::uint8_t>& node_mask,
                                    double hbar) {
    std::vector<double> out(s.psi.size(), 0.0);
    for (std::size_t i = 0; i < s.psi.size(); ++i)
        if (!node_mask[i]) out[i] = hbar * std::imag(s.dpsi_dt.values[i] / s.psi.values[i]);
    return out;
}

/// Per-component guiding family: v_1 = c sin(chi), v_2 = -c sin(chi) with
/// chi = (S_1 - S_2)/hbar - pi/2, evaluated without unwrapping via
/// sin(chi) = -Re(psi_1 conj(psi_2)) / (R_1 R_2). Defined only where neither
/// component is node-masked.
inline std::array<VelocityField, 2>
velocity_weyl_per_component(const PolarField& up, const PolarField& down,
                            const PhysicalConstants& k, int halo = kNodeHalo) {
    const std::size_t n = up.size();
    std::vector<std::uint8_t> either(n, 0);
    for (std::size_t i = 0; i < n; ++i) either[i] = (up.node_mask[i] || down.node_mask[i]) ? 1 : 0;
    const auto excluded = dilate_mask(either, halo);

    VelocityField v1{ModelKind::weyl, 0, up.grid, up.t, std::vector<double>(n, 0.0),
                     std::vector<std::uint8_t>(n, 0)};
    VelocityField v2 = v1;
    v2.component = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (excluded[i]) continue;
        const double sin_chi =
            -std::real(up.psi[i] * std::conj(down.psi[i])) / (up.R[i] * down.R[i]);
        v1.v[i] = k.c * sin_chi;
        v2.v[i] = -k.c * sin_chi;
        v1.defined[i] = v2.defined[i] = 1;
    }
    return {v1, v2};
}

/// Whole-system guiding family: state-independent speeds +c and -c.
inline std::array<VelocityField, 2> velocity_weyl_full(const UniformGrid& g, double t,
                                                       const PhysicalConstants& k) {
    VelocityField v1{ModelKind::weyl, 0, g, t, std::vector<double>(g.n, k.c),
                     std::vector<std::uint8_t>(g.n, 1)};
    VelocityField v2{ModelKind::weyl, 1, g, t, std::vector<double>(g.n, -k.c),
                     std::vector<std::uint8_t>(g.n, 1)};
    return {v1, v2};
}

/// Velocity snapshots of one model branch over a whole history, interpolable
/// in space (cubic) and time (linear).
struct VelocityHistory {
    FieldStack stack;
    int component = 0;

    double t0() const { return stack.times.front(); }
    double t_end() const { return stack.times.back(); }

    std::optional<double> try_sample(double x, double t) const { return stack.try_sample(x, t); }
    double sample(double x, double t) const { return stack.sample(x, t); }
};

/// Field-to-point evaluation of a velocity snapshot stack.
inline double sample_velocity(const VelocityHistory& h, double x, double t) {
    return h.sample(x, t);
}

namespace detail {

inline VelocityField velocity_snapshot(const SnapshotHistory& h, std::size_t j,
                                       const ModelParams& mp, int component, int halo) {
    const auto& k = mp.constants;
    switch (mp.model) {
        case ModelKind::schrodinger:
            return velocity_schrodinger(polar_decompose(h.scalar(j), mp.eps_node, k.hbar), k,
                                        halo);
        case ModelKind::nonconstant_mass:
            return velocity_nonconstant_mass(polar_decompose(h.scalar(j), mp.eps_node, k.hbar),
                                             mp.mass_profile, k, halo);
        case ModelKind::pauli: {
            const auto pr = polar_decompose_spinor(h.spinor(j), mp.eps_node, k.hbar);
            return velocity_pauli(pr.first, pr.second, k, halo)[static_cast<std::size_t>(component)];
        }
        case ModelKind::klein_gordon: {
            const auto& s = h.kg(j);
            const auto p = polar_decompose(s.psi, mp.eps_node, k.hbar);
            return velocity_klein_gordon(p, kg_dS_dt(s, p.node_mask, k.hbar), k, halo);
        }
        case ModelKind::weyl: {
            if (mp.weyl_family == WeylFamily::full_system)
                return velocity_weyl_full(h.grid, h.times[j], k)[static_cast<std::size_t>(component)];
            const auto pr = polar_decompose_spinor(h.spinor(j), mp.eps_node, k.hbar);
            return velocity_weyl_per_component(pr.first, pr.second, k,
                                               halo)[static_cast<std::size_t>(component)];
        }
    }
    throw Error("velocity_snapshot: unreachable");
}

} // namespace detail

/// Build the per-snapshot velocity stack for one component of a history.
inline VelocityHistory build_velocity_history(const SnapshotHistory& h, const ModelParams& mp,
                                              int component = 0, int halo = kNodeHalo) {
    VelocityHistory out;
    out.component = component;
    out.stack.grid = h.grid;
    out.stack.times = h.times;
    out.stack.values.reserve(h.size());
    out.stack.defined.reserve(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) {
        auto vf = detail::velocity_snapshot(h, j, mp, component, halo);
        out.stack.values.push_back(std::move(vf.v));
        out.stack.defined.push_back(std::move(vf.defined));
    }
    return out;
}

} // namespace qtraj
