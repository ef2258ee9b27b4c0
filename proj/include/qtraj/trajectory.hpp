#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qtraj/errors.hpp"
#include "qtraj/interp.hpp"
#include "qtraj/polar.hpp"
#include "qtraj/velocity.hpp"

namespace qtraj {

enum class TrajectoryStatus {
    completed,
    aborted_near_node,
    // reserved: no integration path produces it yet
    left_refinement_tolerance,
};

inline std::string to_string(TrajectoryStatus s) {
    switch (s) {
        case TrajectoryStatus::completed: return "completed";
        case TrajectoryStatus::aborted_near_node: return "aborted_near_node";
        case TrajectoryStatus::left_refinement_tolerance: return "left_refinement_tolerance";
    }
    return "?";
}

/// Along-curve samples at one recorded time. Entries that are unavailable at
/// that point (mask edges, missing history ends) hold NaN.
struct TrajectorySample {
    double v = std::numeric_limits<double>::quiet_NaN();
    double R = std::numeric_limits<double>::quiet_NaN();
    double S = std::numeric_limits<double>::quiet_NaN();
    double W = std::numeric_limits<double>::quiet_NaN();
};

/// One characteristic curve. Positions are wrapped into [x_min, x_max);
/// times coincide with the snapshot grid up to the point of termination.
struct Trajectory {
    int component = 0;
    double seed = 0.0;
    std::vector<double> times;
    std::vector<double> positions;
    std::vector<TrajectorySample> samples;
    TrajectoryStatus status = TrajectoryStatus::completed;

    std::size_t size() const { return positions.size(); }
};

/// Optional per-snapshot stacks used to fill Trajectory samples.
struct AlongCurveStacks {
    const FieldStack* R = nullptr;
    const FieldStack* S = nullptr; // spatially unwrapped action
    const FieldStack* W = nullptr;
    double hbar = 1.0;
};

/// Classical RK4 along the sampled velocity field, step equal to the
/// snapshot spacing, stage velocities linearly interpolated in time. Any
/// stage falling in an undefined region terminates the curve with
/// aborted_near_node.
inline Trajectory integrate_trajectory(const VelocityHistory& vel, double x0,
                                       const AlongCurveStacks* stacks = nullptr) {
    const auto& times = vel.stack.times;
    const UniformGrid& g = vel.stack.grid;

    Trajectory tr;
    tr.component = vel.component;
    tr.seed = g.wrap(x0);

    if (!vel.try_sample(tr.seed, times.front()).has_value())
        throw SeedUndefinedError("integrate_trajectory: seed lies in an undefined region");

    double x = tr.seed;
    tr.times.push_back(times.front());
    tr.positions.push_back(x);
    tr.status = TrajectoryStatus::completed;

    for (std::size_t j = 0; j + 1 < times.size(); ++j) {
        const double t = times[j];
        const double h = times[j + 1] - times[j];
        const auto k1 = vel.try_sample(x, t);
        const auto k2 = k1 ? vel.try_sample(g.wrap(x + 0.5 * h * *k1), t + 0.5 * h)
                           : std::nullopt;
        const auto k3 = k2 ? vel.try_sample(g.wrap(x + 0.5 * h * *k2), t + 0.5 * h)
                           : std::nullopt;
        const auto k4 = k3 ? vel.try_sample(g.wrap(x + h * *k3), t + h) : std::nullopt;
        if (!k4) {
            tr.status = TrajectoryStatus::aborted_near_node;
            break;
        }
        x = g.wrap(x + h / 6.0 * (*k1 + 2.0 * *k2 + 2.0 * *k3 + *k4));
        tr.times.push_back(times[j + 1]);
        tr.positions.push_back(x);
    }

    // Along-curve samples at the recorded points.
    tr.samples.resize(tr.size());
    for (std::size_t j = 0; j < tr.size(); ++j) {
        const auto v = vel.try_sample(tr.positions[j], tr.times[j]);
        if (v) tr.samples[j].v = *v;
        if (stacks) {
            if (stacks->R) {
                const auto r = stacks->R->try_sample(tr.positions[j], tr.times[j]);
                if (r) tr.samples[j].R = *r;
            }
            if (stacks->W) {
                const auto w = stacks->W->try_sample(tr.positions[j], tr.times[j]);
                if (w) tr.samples[j].W = *w;
            }
        }
    }
    if (stacks && stacks->S) {
        // sample the spatially unwrapped action, then unwrap the sampled
        // series in time (gauge period 2*pi*hbar)
        std::vector<double> raw(tr.size(), std::numeric_limits<double>::quiet_NaN());
        bool all_defined = true;
        for (std::size_t j = 0; j < tr.size(); ++j) {
            const auto s = stacks->S->try_sample(tr.positions[j], tr.times[j]);
            if (s) raw[j] = *s;
            else all_defined = false;
        }
        if (all_defined) {
            const auto unwrapped =
                unwrap_series(raw, 2.0 * std::numbers::pi * stacks->hbar);
            for (std::size_t j = 0; j < tr.size(); ++j) tr.samples[j].S = unwrapped[j];
        } else {
            for (std::size_t j = 0; j < tr.size(); ++j) tr.samples[j].S = raw[j];
        }
    }
    return tr;
}

/// Seed positions at the (i+1/2)/n quantiles of a nonnegative density on the
/// grid (inverse of the rectangle-rule CDF, linear within cells). Every
/// returned trajectory then carries equal probability weight.
inline std::vector<double> quantile_seeds(const std::vector<double>& density,
                                          const UniformGrid& g, int n) {
    const std::size_t m = density.size();
    std::vector<double> cum(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        cum[i + 1] = cum[i] + std::max(density[i], 0.0) * g.dx();
    const double total = cum[m];
    if (!(total > 0.0)) throw Error("quantile_seeds: density has zero mass");

    std::vector<double> seeds;
    seeds.reserve(static_cast<std::size_t>(n));
    std::size_t cell = 0;
    for (int i = 0; i < n; ++i) {
        const double target = total * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        while (cell + 1 < m + 1 && cum[cell + 1] < target) ++cell;
        const double mass = cum[cell + 1] - cum[cell];
        const double frac = mass > 0.0 ? (target - cum[cell]) / mass : 0.5;
        seeds.push_back(g.x(cell) + frac * g.dx());
    }
    return seeds;
}

} // namespace qtraj
