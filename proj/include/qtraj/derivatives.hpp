#pragma once

#include <complex>
#include <vector>

#include "qtraj/fft.hpp"
#include "qtraj/field.hpp"
#include "qtraj/grid.hpp"

namespace qtraj {

namespace detail {

/// (ik)^order multiplier for bin j. The Nyquist bin is zeroed for odd orders
/// so real inputs map to real outputs.
inline Complex derivative_multiplier(const UniformGrid& g, std::size_t j, int order) {
    if (order % 2 == 1 && j == g.n / 2) return Complex{0.0, 0.0};
    const Complex ik{0.0, g.wavenumber(j)};
    Complex m{1.0, 0.0};
    for (int p = 0; p < order; ++p) m *= ik;
    return m;
}

} // namespace detail

/// Spectral d^order/dx^order of a periodic complex sample vector.
inline std::vector<Complex> spectral_derivative(const std::vector<Complex>& f,
                                                const UniformGrid& g, int order) {
    const Fft fft(g.n);
    std::vector<Complex> a = f;
    fft.forward(a);
    for (std::size_t j = 0; j < g.n; ++j) a[j] *= detail::derivative_multiplier(g, j, order);
    fft.inverse(a);
    return a;
}

/// Spectral derivative of a periodic real sample vector.
inline std::vector<double> spectral_derivative(const std::vector<double>& f,
                                               const UniformGrid& g, int order) {
    std::vector<Complex> a(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) a[i] = Complex{f[i], 0.0};
    a = spectral_derivative(a, g, order);
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = a[i].real();
    return out;
}

inline std::vector<double> gradient(const std::vector<double>& f, const UniformGrid& g) {
    return spectral_derivative(f, g, 1);
}

inline std::vector<double> laplacian(const std::vector<double>& f, const UniformGrid& g) {
    return spectral_derivative(f, g, 2);
}

inline std::vector<double> biharmonic(const std::vector<double>& f, const UniformGrid& g) {
    return spectral_derivative(f, g, 4);
}

/// Pointwise derivatives of log psi up to the requested order, defined away
/// from node-masked points (dilated by `halo`). Since log psi = log R + iS/hbar,
/// the real parts are derivatives of log R and the imaginary parts are
/// derivatives of S/hbar. Everything is assembled from spectral derivatives
/// of the periodic field psi itself, so no phase unwrapping enters and the
/// result is spectrally accurate wherever |psi| is not tiny.
class LogDerivatives {
public:
    LogDerivatives(const ComplexField& f, const std::vector<std::uint8_t>& node_mask,
                   int order, double hbar, int halo = kNodeHalo)
        : hbar_(hbar), order_(order), usable_(f.size(), 0) {
        const std::size_t n = f.size();
        const auto excluded = dilate_mask(node_mask, halo);
        for (std::size_t i = 0; i < n; ++i) usable_[i] = excluded[i] ? 0 : 1;

        const Fft fft(n);
        std::vector<Complex> hat = f.values;
        fft.forward(hat);

        std::vector<std::vector<Complex>> ratio(static_cast<std::size_t>(order));
        std::vector<Complex> work(n);
        for (int m = 1; m <= order; ++m) {
            work = hat;
            for (std::size_t j = 0; j < n; ++j)
                work[j] *= detail::derivative_multiplier(f.grid, j, m);
            fft.inverse(work);
            auto& r = ratio[static_cast<std::size_t>(m - 1)];
            r.assign(n, Complex{0.0, 0.0});
            for (std::size_t i = 0; i < n; ++i)
                if (usable_[i]) r[i] = work[i] / f.values[i];
        }

        mu_.assign(static_cast<std::size_t>(order), std::vector<Complex>(n, Complex{0.0, 0.0}));
        for (std::size_t i = 0; i < n; ++i) {
            if (!usable_[i]) continue;
            const Complex r1 = ratio[0][i];
            mu_[0][i] = r1;
            if (order >= 2) {
                const Complex r2 = ratio[1][i];
                mu_[1][i] = r2 - r1 * r1;
                if (order >= 3) {
                    const Complex r3 = ratio[2][i];
                    mu_[2][i] = r3 - 3.0 * r2 * r1 + 2.0 * r1 * r1 * r1;
                    if (order >= 4) {
                        const Complex r4 = ratio[3][i];
                        mu_[3][i] = r4 - 4.0 * r3 * r1 - 3.0 * r2 * r2 +
                                    12.0 * r2 * r1 * r1 - 6.0 * r1 * r1 * r1 * r1;
                    }
                }
            }
        }
    }

    const std::vector<std::uint8_t>& usable() const { return usable_; }
    bool defined(std::size_t i) const { return usable_[i] != 0; }
    int order() const { return order_; }

    /// d^m/dx^m log psi at point i (m in 1..order).
    Complex mu(int m, std::size_t i) const { return mu_[static_cast<std::size_t>(m - 1)][i]; }

    double grad_S(std::size_t i) const { return hbar_ * mu(1, i).imag(); }
    double lap_S(std::size_t i) const { return hbar_ * mu(2, i).imag(); }
    double grad3_S(std::size_t i) const { return hbar_ * mu(3, i).imag(); }
    double grad4_S(std::size_t i) const { return hbar_ * mu(4, i).imag(); }

    double grad_lnR(std::size_t i) const { return mu(1, i).real(); }
    double lap_lnR(std::size_t i) const { return mu(2, i).real(); }
    double grad3_lnR(std::size_t i) const { return mu(3, i).real(); }

    /// R''/R = (ln R)'' + ((ln R)')^2.
    double lap_R_over_R(std::size_t i) const {
        const double a = grad_lnR(i);
        return lap_lnR(i) + a * a;
    }

    /// d/dx of R''/R.
    double d_lap_R_over_R(std::size_t i) const {
        return grad3_lnR(i) + 2.0 * grad_lnR(i) * lap_lnR(i);
    }

private:
    double hbar_;
    int order_;
    std::vector<std::uint8_t> usable_;
    std::vector<std::vector<Complex>> mu_;
};

} // namespace qtraj
