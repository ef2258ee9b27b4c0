#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <utility>
#include <vector>

#include "qtraj/errors.hpp"
#include "qtraj/field.hpp"
#include "qtraj/grid.hpp"

namespace qtraj {

/// Madelung decomposition of a complex field: amplitude R, unwrapped action S
/// (units of hbar), and the node mask. The source amplitudes are kept so that
/// derivative pipelines can work on the smooth periodic field instead of the
/// unwrapped (and node-filled) action.
struct PolarField {
    UniformGrid grid;
    double t = 0.0;
    std::vector<double> R;
    std::vector<double> S;
    std::vector<std::uint8_t> node_mask;
    std::vector<Complex> psi;

    std::size_t size() const { return R.size(); }
};

/// Maximal stretches of consecutive unmasked cells in cyclic index order,
/// as (start, length) pairs. A fully unmasked grid yields one run starting
/// at index 0.
inline std::vector<std::pair<std::size_t, std::size_t>>
unmasked_runs(const std::vector<std::uint8_t>& mask) {
    const std::size_t n = mask.size();
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    bool any_masked = false, any_clear = false;
    for (auto m : mask) (m ? any_masked : any_clear) = true;
    if (!any_clear) return runs;
    if (!any_masked) {
        runs.emplace_back(0, n);
        return runs;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t prev = (i + n - 1) % n;
        if (!mask[i] && mask[prev]) {
            std::size_t len = 0;
            while (!mask[(i + len) % n]) ++len;
            runs.emplace_back(i, len);
        }
    }
    std::sort(runs.begin(), runs.end());
    return runs;
}

namespace detail {

/// Wrap an angle increment into (-pi, pi].
inline double principal_increment(double d) {
    const double two_pi = 2.0 * std::numbers::pi;
    d = std::fmod(d, two_pi);
    if (d <= -std::numbers::pi) d += two_pi;
    if (d > std::numbers::pi) d -= two_pi;
    return d;
}

/// Integer k with value - 2*pi*k in (-pi, pi].
inline double rewind_to_principal(double value) {
    const double two_pi = 2.0 * std::numbers::pi;
    const double k = std::ceil((value - std::numbers::pi) / two_pi);
    return value - two_pi * k;
}

} // namespace detail

/// Polar decomposition with left-to-right phase unwrapping inside each
/// unmasked cyclic run. The run containing the global maximum of R is
/// anchored so that S there lies in (-pi*hbar, pi*hbar]; every other run is
/// anchored the same way at its own amplitude maximum (phase is best
/// conditioned far from nodes). Masked stretches get a linear S fill between
/// the bracketing run endpoints; the fill is flagged by node_mask and never
/// differentiated.
inline PolarField polar_decompose(const ComplexField& f, double eps_node, double hbar = 1.0) {
    const std::size_t n = f.size();
    PolarField p;
    p.grid = f.grid;
    p.t = f.t;
    p.psi = f.values;
    p.R.resize(n);
    p.S.assign(n, 0.0);
    p.node_mask.assign(n, 0);

    double r_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p.R[i] = std::abs(f.values[i]);
        r_max = std::max(r_max, p.R[i]);
    }
    if (r_max == 0.0) throw AllNodesError("polar_decompose: field is identically zero");

    const double threshold = eps_node * r_max;
    for (std::size_t i = 0; i < n; ++i) p.node_mask[i] = (p.R[i] < threshold) ? 1 : 0;

    const auto runs = unmasked_runs(p.node_mask);
    for (const auto& [start, len] : runs) {
        p.S[start] = std::arg(f.values[start]);
        std::size_t peak = start;
        for (std::size_t o = 1; o < len; ++o) {
            const std::size_t i = (start + o) % n;
            const std::size_t prev_i = (start + o - 1) % n;
            const double inc =
                detail::principal_increment(std::arg(f.values[i]) - std::arg(f.values[prev_i]));
            p.S[i] = p.S[prev_i] + inc;
            if (p.R[i] > p.R[peak]) peak = i;
        }
        const double shift = p.S[peak] - detail::rewind_to_principal(p.S[peak]);
        for (std::size_t o = 0; o < len; ++o) p.S[(start + o) % n] -= shift;
    }

    // Linear fill across masked stretches, endpoints taken from the
    // neighbouring runs.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t prev_i = (i + n - 1) % n;
        if (!(p.node_mask[i] && !p.node_mask[prev_i])) continue;
        // i starts a masked stretch; prev_i is its left unmasked neighbour
        std::size_t len = 0;
        while (p.node_mask[(i + len) % n]) ++len;
        const std::size_t next_i = (i + len) % n;
        const double a = p.S[prev_i];
        const double b = p.S[next_i];
        for (std::size_t o = 0; o < len; ++o)
            p.S[(i + o) % n] =
                a + (b - a) * static_cast<double>(o + 1) / static_cast<double>(len + 1);
    }

    for (std::size_t i = 0; i < n; ++i) p.S[i] *= hbar;
    return p;
}

/// Rebuild the complex field R*exp(iS/hbar).
inline ComplexField recompose(const PolarField& p, double hbar = 1.0) {
    ComplexField f(p.grid, p.t);
    for (std::size_t i = 0; i < p.size(); ++i)
        f.values[i] = p.R[i] * std::exp(Complex{0.0, p.S[i] / hbar});
    return f;
}

/// Shift the action of `p` by per-run multiples of 2*pi*hbar so it tracks
/// `ref` continuously in time. The shift per run is the nearest gauge
/// multiple of the median pointwise difference over cells unmasked in both
/// fields; runs with no overlap are left untouched.
inline void align_action_to(const PolarField& ref, PolarField& p, double hbar = 1.0) {
    const double gauge = 2.0 * std::numbers::pi * hbar;
    for (const auto& [start, len] : unmasked_runs(p.node_mask)) {
        std::vector<double> diffs;
        diffs.reserve(len);
        for (std::size_t o = 0; o < len; ++o) {
            const std::size_t i = (start + o) % p.size();
            if (!ref.node_mask[i]) diffs.push_back(p.S[i] - ref.S[i]);
        }
        if (diffs.empty()) continue;
        const std::size_t mid = diffs.size() / 2;
        std::nth_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(mid),
                         diffs.end());
        const double shift = gauge * std::round(diffs[mid] / gauge);
        if (shift == 0.0) continue;
        for (std::size_t o = 0; o < len; ++o) p.S[(start + o) % p.size()] -= shift;
    }
}

/// Unwrap a sampled scalar time series: each increment is brought within
/// (-period/2, period/2] of zero by adding period multiples.
inline std::vector<double> unwrap_series(const std::vector<double>& s, double period) {
    std::vector<double> out(s.size());
    if (s.empty()) return out;
    out[0] = s[0];
    for (std::size_t j = 1; j < s.size(); ++j) {
        double d = s[j] - s[j - 1];
        d -= period * std::round(d / period);
        out[j] = out[j - 1] + d;
    }
    return out;
}

/// Per-component polar decomposition of a spinor. Node masks are taken
/// relative to the spinor-wide amplitude maximum, so a numerically vanishing
/// component comes out fully masked rather than raising AllNodes.
inline std::pair<PolarField, PolarField>
polar_decompose_spinor(const SpinorField& f, double eps_node, double hbar = 1.0) {
    double r_max = 0.0;
    for (std::size_t i = 0; i < f.up.size(); ++i) {
        r_max = std::max(r_max, std::abs(f.up.values[i]));
        r_max = std::max(r_max, std::abs(f.down.values[i]));
    }
    if (r_max == 0.0) throw AllNodesError("polar_decompose_spinor: spinor is identically zero");

    auto decompose_component = [&](const ComplexField& c) {
        const double comp_max = [&] {
            double m = 0.0;
            for (const auto& v : c.values) m = std::max(m, std::abs(v));
            return m;
        }();
        const double threshold = eps_node * r_max;
        if (comp_max < threshold) {
            PolarField p;
            p.grid = c.grid;
            p.t = c.t;
            p.psi = c.values;
            p.R.resize(c.size());
            for (std::size_t i = 0; i < c.size(); ++i) p.R[i] = std::abs(c.values[i]);
            p.S.assign(c.size(), 0.0);
            p.node_mask.assign(c.size(), 1);
            return p;
        }
        // reuse the scalar path, then re-threshold against the spinor max
        PolarField p = polar_decompose(c, eps_node * r_max / comp_max, hbar);
        return p;
    };
    return {decompose_component(f.up), decompose_component(f.down)};
}

} // namespace qtraj
