#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace qtraj {

using Complex = std::complex<double>;

/// In-place iterative radix-2 FFT for power-of-two sizes, with precomputed
/// twiddles and bit-reversal table. Forward uses e^{-ikx} kernel; inverse
/// divides by n.
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n), rev_(n), twiddle_(n / 2) {
        std::size_t log2n = 0;
        while ((std::size_t{1} << log2n) < n_) ++log2n;
        for (std::size_t i = 0; i < n_; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2n; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
            rev_[i] = r;
        }
        for (std::size_t j = 0; j < n_ / 2; ++j) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(j) /
                               static_cast<double>(n_);
            twiddle_[j] = Complex(std::cos(ang), std::sin(ang));
        }
    }

    std::size_t size() const { return n_; }

    void forward(std::vector<Complex>& a) const { transform(a, false); }

    void inverse(std::vector<Complex>& a) const {
        transform(a, true);
        const double s = 1.0 / static_cast<double>(n_);
        for (auto& v : a) v *= s;
    }

private:
    void transform(std::vector<Complex>& a, bool inv) const {
        for (std::size_t i = 0; i < n_; ++i)
            if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t step = n_ / len;
            const std::size_t half = len / 2;
            for (std::size_t base = 0; base < n_; base += len) {
                for (std::size_t j = 0; j < half; ++j) {
                    Complex w = twiddle_[j * step];
                    if (inv) w = std::conj(w);
                    const Complex u = a[base + j];
                    const Complex v = a[base + j + half] * w;
                    a[base + j] = u + v;
                    a[base + j + half] = u - v;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<std::size_t> rev_;
    std::vector<Complex> twiddle_;
};

} // namespace qtraj
