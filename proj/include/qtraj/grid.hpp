#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qtraj/errors.hpp"

namespace qtraj {

/// Cells a derivative-based quantity is considered unusable around a node.
inline constexpr int kNodeHalo = 3;

/// Uniform periodic 1-D grid. Points are x_min + i*dx for i in [0, n);
/// x_max is identified with x_min. n must be a power of two so that all
/// spatial derivatives can be taken spectrally.
struct UniformGrid {
    double x_min = 0.0;
    double x_max = 1.0;
    std::size_t n = 0;

    UniformGrid() = default;
    UniformGrid(double x_min_, double x_max_, std::size_t n_)
        : x_min(x_min_), x_max(x_max_), n(n_) {
        if (!(x_max > x_min))
            throw ValidationError("grid_extent", "grid requires x_max > x_min");
        if (n < 2 || (n & (n - 1)) != 0)
            throw ValidationError("n_points_power_of_two",
                                  "n_points must be a power of two >= 2");
    }

    double length() const { return x_max - x_min; }
    double dx() const { return length() / static_cast<double>(n); }
    double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }

    std::vector<double> points() const {
        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i) xs[i] = x(i);
        return xs;
    }

    /// Signed integer mode index for FFT bin j (0..n-1).
    double mode(std::size_t j) const {
        return (j <= n / 2) ? static_cast<double>(j)
                            : static_cast<double>(j) - static_cast<double>(n);
    }

    /// Angular wavenumber of FFT bin j: 2*pi*mode/L.
    double wavenumber(std::size_t j) const {
        return 2.0 * std::numbers::pi * mode(j) / length();
    }

    /// Largest resolvable |k| (Nyquist).
    double k_max() const { return std::numbers::pi / dx(); }

    /// Wrap a coordinate into [x_min, x_max).
    double wrap(double x) const {
        const double L = length();
        double y = std::fmod(x - x_min, L);
        if (y < 0.0) y += L;
        // fmod can return L after rounding when x is epsilon-below a period edge
        if (y >= L) y -= L;
        return x_min + y;
    }

    friend bool operator==(const UniformGrid& a, const UniformGrid& b) {
        return a.x_min == b.x_min && a.x_max == b.x_max && a.n == b.n;
    }
    friend bool operator!=(const UniformGrid& a, const UniformGrid& b) { return !(a == b); }
};

/// Physical constants of a scenario. hbar, c are strictly positive; the
/// charge may take any sign. The scalar mass must be positive wherever 1/m
/// enters the dynamics (Schrodinger family); the relativistic models only
/// need m >= 0.
struct PhysicalConstants {
    double hbar = 1.0;
    double mass = 1.0;
    double c = 1.0;
    double charge = 1.0;

    void validate(bool mass_may_vanish = false) const {
        if (!(hbar > 0.0))
            throw ValidationError("constants_positive", "hbar must be > 0");
        if (!(c > 0.0))
            throw ValidationError("constants_positive", "c must be > 0");
        if (mass_may_vanish ? !(mass >= 0.0) : !(mass > 0.0))
            throw ValidationError("constants_positive",
                                  mass_may_vanish ? "mass must be >= 0" : "mass must be > 0");
    }
};

/// Dilate a boolean mask cyclically by `halo` cells on each side.
/// (helper shared by velocity masks and derivative tables)
inline std::vector<std::uint8_t> dilate_mask(const std::vector<std::uint8_t>& mask, int halo) {
    const std::size_t n = mask.size();
    if (halo <= 0) return mask;
    std::vector<std::uint8_t> out(n, 0);
    const long long nn = static_cast<long long>(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        for (int d = -halo; d <= halo; ++d) {
            const long long j = (static_cast<long long>(i) + d % nn + nn) % nn;
            out[static_cast<std::size_t>(j)] = 1;
        }
    }
    return out;
}

} // namespace qtraj
