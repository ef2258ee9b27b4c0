#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "qtraj/derivatives.hpp"
#include "qtraj/errors.hpp"
#include "qtraj/grid.hpp"

namespace qtraj {

/// Static external potential V(x). Analytic kinds expose closed-form
/// gradients; tabulated profiles are differentiated spectrally.
struct PotentialSpec {
    enum class Kind { zero, harmonic, gaussian_barrier, tabulated };

    Kind kind = Kind::zero;
    double omega = 1.0;    // harmonic
    double center = 0.0;   // harmonic / gaussian_barrier
    double height = 0.0;   // gaussian_barrier
    double width = 1.0;    // gaussian_barrier
    std::vector<double> table;

    static PotentialSpec zero() { return {}; }
    static PotentialSpec harmonic(double omega, double center = 0.0) {
        PotentialSpec p;
        p.kind = Kind::harmonic;
        p.omega = omega;
        p.center = center;
        return p;
    }
    static PotentialSpec gaussian_barrier(double height, double width, double center) {
        PotentialSpec p;
        p.kind = Kind::gaussian_barrier;
        p.height = height;
        p.width = width;
        p.center = center;
        return p;
    }
    static PotentialSpec tabulated(std::vector<double> values) {
        PotentialSpec p;
        p.kind = Kind::tabulated;
        p.table = std::move(values);
        return p;
    }

    /// V at every grid point. The harmonic well is (1/2) m omega^2 (x-c)^2
    /// with m the scenario's scalar reference mass.
    std::vector<double> values(const UniformGrid& g, const PhysicalConstants& k) const {
        std::vector<double> v(g.n, 0.0);
        switch (kind) {
            case Kind::zero: break;
            case Kind::harmonic:
                for (std::size_t i = 0; i < g.n; ++i) {
                    const double d = g.x(i) - center;
                    v[i] = 0.5 * k.mass * omega * omega * d * d;
                }
                break;
            case Kind::gaussian_barrier:
                for (std::size_t i = 0; i < g.n; ++i) {
                    const double d = g.x(i) - center;
                    v[i] = height * std::exp(-d * d / (2.0 * width * width));
                }
                break;
            case Kind::tabulated:
                if (table.size() != g.n)
                    throw ValidationError("tabulated_length",
                                          "tabulated potential length != n_points");
                v = table;
                break;
        }
        return v;
    }

    /// dV/dx at every grid point (analytic where possible).
    std::vector<double> gradient_values(const UniformGrid& g, const PhysicalConstants& k) const {
        std::vector<double> v(g.n, 0.0);
        switch (kind) {
            case Kind::zero: break;
            case Kind::harmonic:
                for (std::size_t i = 0; i < g.n; ++i)
                    v[i] = k.mass * omega * omega * (g.x(i) - center);
                break;
            case Kind::gaussian_barrier:
                for (std::size_t i = 0; i < g.n; ++i) {
                    const double d = g.x(i) - center;
                    v[i] = -height * d / (width * width) *
                           std::exp(-d * d / (2.0 * width * width));
                }
                break;
            case Kind::tabulated:
                v = gradient(values(g, k), g);
                break;
        }
        return v;
    }
};

/// Mass profile m(x). Strictly positive everywhere.
struct MassSpec {
    enum class Kind { constant, tabulated };

    Kind kind = Kind::constant;
    std::vector<double> table;

    static MassSpec constant() { return {}; }
    static MassSpec tabulated(std::vector<double> values) {
        MassSpec m;
        m.kind = Kind::tabulated;
        m.table = std::move(values);
        return m;
    }

    std::vector<double> values(const UniformGrid& g, const PhysicalConstants& k) const {
        if (kind == Kind::constant) return std::vector<double>(g.n, k.mass);
        if (table.size() != g.n)
            throw ValidationError("tabulated_length", "tabulated mass length != n_points");
        for (double m : table)
            if (!(m > 0.0)) throw ValidationError("mass_positive", "m(x) must be > 0 everywhere");
        return table;
    }

    std::vector<double> gradient_values(const UniformGrid& g, const PhysicalConstants& k) const {
        if (kind == Kind::constant) return std::vector<double>(g.n, 0.0);
        return gradient(values(g, k), g);
    }

    std::vector<double> second_derivative_values(const UniformGrid& g,
                                                 const PhysicalConstants& k) const {
        if (kind == Kind::constant) return std::vector<double>(g.n, 0.0);
        return laplacian(values(g, k), g);
    }
};

/// External electromagnetic data for the spin-coupled model: a scalar
/// potential and a directly supplied magnetic field. The vector potential is
/// identically zero by contract.
struct ExternalFieldSpec {
    PotentialSpec phi;                          // scalar potential
    std::array<double, 3> b_uniform{0.0, 0.0, 0.0};
    std::array<std::vector<double>, 3> b_table; // empty => uniform
    bool tabulated = false;

    static ExternalFieldSpec uniform(const PotentialSpec& phi, std::array<double, 3> B) {
        ExternalFieldSpec f;
        f.phi = phi;
        f.b_uniform = B;
        return f;
    }

    std::array<std::vector<double>, 3> b_values(const UniformGrid& g) const {
        std::array<std::vector<double>, 3> out;
        for (int a = 0; a < 3; ++a) {
            if (tabulated) {
                if (b_table[static_cast<std::size_t>(a)].size() != g.n)
                    throw ValidationError("tabulated_length",
                                          "tabulated B component length != n_points");
                out[static_cast<std::size_t>(a)] = b_table[static_cast<std::size_t>(a)];
            } else {
                out[static_cast<std::size_t>(a)] =
                    std::vector<double>(g.n, b_uniform[static_cast<std::size_t>(a)]);
            }
        }
        return out;
    }
};

} // namespace qtraj
