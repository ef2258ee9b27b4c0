#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "qtraj/errors.hpp"
#include "qtraj/grid.hpp"

namespace qtraj {

using Complex = std::complex<double>;

/// Complex amplitudes on a uniform periodic grid at one time stamp.
struct ComplexField {
    UniformGrid grid;
    double t = 0.0;
    std::vector<Complex> values;

    ComplexField() = default;
    ComplexField(const UniformGrid& g, double time)
        : grid(g), t(time), values(g.n, Complex{0.0, 0.0}) {}
    ComplexField(const UniformGrid& g, double time, std::vector<Complex> v)
        : grid(g), t(time), values(std::move(v)) {
        if (values.size() != grid.n)
            throw GridMismatchError("ComplexField: values length != n_points");
    }

    std::size_t size() const { return values.size(); }

    /// Rectangle-rule L2 norm, sqrt(integral |psi|^2 dx).
    double l2_norm() const {
        double s = 0.0;
        for (const auto& v : values) s += std::norm(v);
        return std::sqrt(s * grid.dx());
    }

    double norm_squared() const {
        double s = 0.0;
        for (const auto& v : values) s += std::norm(v);
        return s * grid.dx();
    }
};

/// Rectangle-rule integral of a real sample vector.
inline double integrate(const std::vector<double>& f, const UniformGrid& g) {
    double s = 0.0;
    for (double v : f) s += v;
    return s * g.dx();
}

/// Two-component spinor sharing one grid and time stamp.
struct SpinorField {
    ComplexField up;
    ComplexField down;

    SpinorField() = default;
    SpinorField(ComplexField a, ComplexField b) : up(std::move(a)), down(std::move(b)) {
        if (up.grid != down.grid || up.t != down.t)
            throw GridMismatchError("SpinorField: components must share grid and time");
    }

    const ComplexField& component(int i) const { return i == 0 ? up : down; }
    ComplexField& component(int i) { return i == 0 ? up : down; }

    double t() const { return up.t; }
    const UniformGrid& grid() const { return up.grid; }

    double norm_squared() const { return up.norm_squared() + down.norm_squared(); }
};

/// State of the second-order-in-time wave equation: the field and its time
/// derivative at the same instant.
struct KGState {
    ComplexField psi;
    ComplexField dpsi_dt;

    KGState() = default;
    KGState(ComplexField p, ComplexField dp) : psi(std::move(p)), dpsi_dt(std::move(dp)) {
        if (psi.grid != dpsi_dt.grid || psi.t != dpsi_dt.t)
            throw GridMismatchError("KGState: psi and dpsi_dt must share grid and time");
    }

    double t() const { return psi.t; }
    const UniformGrid& grid() const { return psi.grid; }
};

/// Real samples plus a per-point definedness flag. Undefined points carry a
/// quiet-NaN sentinel.
struct MaskedField {
    std::vector<double> values;
    std::vector<std::uint8_t> defined;

    MaskedField() = default;
    explicit MaskedField(std::size_t n)
        : values(n, std::numeric_limits<double>::quiet_NaN()), defined(n, 0) {}

    std::size_t size() const { return values.size(); }

    void set(std::size_t i, double v) {
        values[i] = v;
        defined[i] = 1;
    }

    double max_abs() const {
        double m = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            if (defined[i]) m = std::max(m, std::abs(values[i]));
        return m;
    }

    std::size_t defined_count() const {
        std::size_t c = 0;
        for (auto d : defined) c += d;
        return c;
    }
};

/// max |a-b| over points defined in both.
inline double linf_difference(const MaskedField& a, const MaskedField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.defined[i] && b.defined[i]) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

} // namespace qtraj
