#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "qtraj/errors.hpp"
#include "qtraj/grid.hpp"

namespace qtraj {

namespace detail {

/// Catmull-Rom value at local coordinate u in [0,1) between f0 and f1.
inline double catmull_rom(double fm1, double f0, double f1, double f2, double u) {
    const double a = 2.0 * f0;
    const double b = f1 - fm1;
    const double c = 2.0 * fm1 - 5.0 * f0 + 4.0 * f1 - f2;
    const double d = -fm1 + 3.0 * f0 - 3.0 * f1 + f2;
    return 0.5 * (a + b * u + (c + d * u) * u * u);
}

} // namespace detail

/// One masked real field sampled on a periodic grid, interpolable in space.
struct SpatialSamples {
    const UniformGrid* grid = nullptr;
    const std::vector<double>* values = nullptr;
    const std::vector<std::uint8_t>* defined = nullptr; // nullptr => everywhere

    std::optional<double> try_at(double x) const {
        const UniformGrid& g = *grid;
        const double xw = g.wrap(x);
        const double s = (xw - g.x_min) / g.dx();
        const auto cell = static_cast<std::size_t>(std::floor(s)) % g.n;
        const double u = s - std::floor(s);
        const std::size_t n = g.n;
        const std::size_t im1 = (cell + n - 1) % n;
        const std::size_t ip1 = (cell + 1) % n;
        const std::size_t ip2 = (cell + 2) % n;
        if (defined) {
            if (!(*defined)[im1] || !(*defined)[cell] || !(*defined)[ip1] || !(*defined)[ip2])
                return std::nullopt;
        }
        return detail::catmull_rom((*values)[im1], (*values)[cell], (*values)[ip1],
                                   (*values)[ip2], u);
    }
};

/// A per-snapshot stack of masked real fields: cubic interpolation in space,
/// linear interpolation in time between the bracketing snapshots.
struct FieldStack {
    UniformGrid grid;
    std::vector<double> times;
    std::vector<std::vector<double>> values;
    std::vector<std::vector<std::uint8_t>> defined; // may be empty => everywhere defined

    std::size_t size() const { return values.size(); }

    /// Index of the snapshot at or just before t, given uniform spacing.
    std::pair<std::size_t, double> bracket(double t) const {
        if (times.size() == 1) return {0, 0.0};
        const double dt = times[1] - times[0];
        double s = (t - times.front()) / dt;
        if (s < 0.0) {
            if (s > -1e-9) s = 0.0;
            else throw UndefinedRegionError("sample: time before history span");
        }
        auto j = static_cast<std::size_t>(std::floor(s));
        if (j >= times.size() - 1) {
            if (s <= static_cast<double>(times.size() - 1) + 1e-9) {
                j = times.size() - 2;
            } else {
                throw UndefinedRegionError("sample: time after history span");
            }
        }
        return {j, std::min(std::max(s - static_cast<double>(j), 0.0), 1.0)};
    }

    std::optional<double> try_sample(double x, double t) const {
        const auto [j, w] = bracket(t);
        const SpatialSamples lo{&grid, &values[j], defined.empty() ? nullptr : &defined[j]};
        const auto a = lo.try_at(x);
        if (!a) return std::nullopt;
        if (w == 0.0) return a;
        const SpatialSamples hi{&grid, &values[j + 1],
                                defined.empty() ? nullptr : &defined[j + 1]};
        const auto b = hi.try_at(x);
        if (!b) return std::nullopt;
        return (1.0 - w) * *a + w * *b;
    }

    double sample(double x, double t) const {
        const auto v = try_sample(x, t);
        if (!v)
            throw UndefinedRegionError("sample: interpolation stencil touches undefined cells");
        return *v;
    }
};

} // namespace qtraj
