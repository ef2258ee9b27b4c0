#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qtraj/derivatives.hpp"
#include "qtraj/errors.hpp"
#include "qtraj/fft.hpp"
#include "qtraj/field.hpp"
#include "qtraj/grid.hpp"
#include "qtraj/potential.hpp"

namespace qtraj {

enum class ModelKind { schrodinger, nonconstant_mass, pauli, klein_gordon, weyl };
enum class WeylFamily { per_component, full_system };

inline std::string to_string(ModelKind m) {
    switch (m) {
        case ModelKind::schrodinger: return "schrodinger";
        case ModelKind::nonconstant_mass: return "nonconstant_mass";
        case ModelKind::pauli: return "pauli";
        case ModelKind::klein_gordon: return "klein_gordon";
        case ModelKind::weyl: return "weyl";
    }
    return "?";
}

inline std::string to_string(WeylFamily f) {
    return f == WeylFamily::per_component ? "per_component" : "full_system";
}

/// Everything the dynamics of one scenario needs besides the state itself.
struct ModelParams {
    ModelKind model = ModelKind::schrodinger;
    PhysicalConstants constants;
    PotentialSpec potential;
    MassSpec mass_profile;
    std::optional<ExternalFieldSpec> external_field;
    WeylFamily weyl_family = WeylFamily::per_component;
    double eps_node = 1e-6;

    bool relativistic() const {
        return model == ModelKind::klein_gordon || model == ModelKind::weyl;
    }
};

using ModelState = std::variant<ComplexField, SpinorField, KGState>;

inline double state_time(const ModelState& s) {
    return std::visit([](const auto& v) {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, ComplexField>) return v.t;
        else return v.t();
    }, s);
}

/// Time-ordered record of propagated states at uniform snapshot spacing.
struct SnapshotHistory {
    ModelKind model = ModelKind::schrodinger;
    UniformGrid grid;
    double dt = 0.0; // snapshot spacing
    std::vector<double> times;
    std::vector<ModelState> states;

    std::size_t size() const { return states.size(); }

    const ComplexField& scalar(std::size_t j) const { return std::get<ComplexField>(states[j]); }
    const SpinorField& spinor(std::size_t j) const { return std::get<SpinorField>(states[j]); }
    const KGState& kg(std::size_t j) const { return std::get<KGState>(states[j]); }

    void require_at_least(std::size_t n, const char* what) const {
        if (size() < n)
            throw InsufficientHistoryError(std::string(what) + ": needs at least " +
                                           std::to_string(n) + " snapshots");
    }
};

// ---------------------------------------------------------------------------
// Schrodinger: Strang split-operator, spectral kinetic phase.

class SchrodingerStepper {
public:
    SchrodingerStepper(const UniformGrid& g, const PotentialSpec& V,
                       const PhysicalConstants& k, double dt)
        : grid_(g), fft_(g.n), dt_(dt) {
        const auto v = V.values(g, k);
        half_potential_.resize(g.n);
        kinetic_.resize(g.n);
        for (std::size_t i = 0; i < g.n; ++i)
            half_potential_[i] = std::exp(Complex{0.0, -v[i] * dt / (2.0 * k.hbar)});
        for (std::size_t j = 0; j < g.n; ++j) {
            const double kk = g.wavenumber(j);
            kinetic_[j] = std::exp(Complex{0.0, -k.hbar * kk * kk * dt / (2.0 * k.mass)});
        }
    }

    ComplexField step(const ComplexField& psi) const {
        ComplexField out = psi;
        for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= half_potential_[i];
        fft_.forward(out.values);
        for (std::size_t j = 0; j < out.size(); ++j) out.values[j] *= kinetic_[j];
        fft_.inverse(out.values);
        for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= half_potential_[i];
        out.t = psi.t + dt_;
        return out;
    }

private:
    UniformGrid grid_;
    Fft fft_;
    double dt_;
    std::vector<Complex> half_potential_;
    std::vector<Complex> kinetic_;
};

inline ComplexField step_schrodinger(const ComplexField& psi, const PotentialSpec& V,
                                     const PhysicalConstants& k, double dt) {
    return SchrodingerStepper(psi.grid, V, k, dt).step(psi);
}

// ---------------------------------------------------------------------------
// Position-dependent mass: Crank-Nicolson on H = -(hbar^2/2) D (1/m) D + V
// with D the spectral first derivative; the implicit system is solved with
// BiCGSTAB (the Cayley operator is normal and very well conditioned at the
// step sizes in use).

namespace detail {

inline Complex dot(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    Complex s{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

inline double norm2(const std::vector<Complex>& a) {
    double s = 0.0;
    for (const auto& v : a) s += std::norm(v);
    return std::sqrt(s);
}

template <class MatVec>
std::vector<Complex> bicgstab(const MatVec& A, const std::vector<Complex>& b,
                              std::vector<Complex> x, double tol, int max_iter) {
    const std::size_t n = b.size();
    std::vector<Complex> r(n), r_hat(n), p(n, Complex{}), v(n, Complex{}), s(n), t(n), ax(n);
    A(x, ax);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax[i];
    r_hat = r;
    Complex rho{1.0, 0.0}, alpha{1.0, 0.0}, omega{1.0, 0.0};
    const double target = tol * std::max(norm2(b), 1e-300);
    if (norm2(r) <= target) return x;
    for (int it = 0; it < max_iter; ++it) {
        const Complex rho1 = dot(r_hat, r);
        if (std::abs(rho1) < 1e-300) throw SolverDivergedError("bicgstab: rho breakdown");
        if (it == 0) {
            p = r;
        } else {
            const Complex beta = (rho1 / rho) * (alpha / omega);
            for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        A(p, v);
        const Complex denom = dot(r_hat, v);
        if (std::abs(denom) < 1e-300) throw SolverDivergedError("bicgstab: alpha breakdown");
        alpha = rho1 / denom;
        for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (norm2(s) <= target) {
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
            return x;
        }
        A(s, t);
        const Complex tt = dot(t, t);
        if (std::abs(tt) < 1e-300) throw SolverDivergedError("bicgstab: omega breakdown");
        omega = dot(t, s) / tt;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if (norm2(r) <= target) return x;
        rho = rho1;
    }
    throw SolverDivergedError("bicgstab: no convergence within iteration cap");
}

} // namespace detail

class MassVaryingStepper {
public:
    MassVaryingStepper(const UniformGrid& g, const PotentialSpec& V, const MassSpec& mass,
                       const PhysicalConstants& k, double dt, int max_iter = 400,
                       double tol = 1e-13)
        : grid_(g), fft_(g.n), dt_(dt), hbar_(k.hbar), max_iter_(max_iter), tol_(tol) {
        v_ = V.values(g, k);
        const auto m = mass.values(g, k);
        inv_m_.resize(g.n);
        for (std::size_t i = 0; i < g.n; ++i) inv_m_[i] = 1.0 / m[i];
        ik_.resize(g.n);
        for (std::size_t j = 0; j < g.n; ++j)
            ik_[j] = detail::derivative_multiplier(g, j, 1);
    }

    void apply_hamiltonian(const std::vector<Complex>& in, std::vector<Complex>& out) const {
        std::vector<Complex> w = in;
        fft_.forward(w);
        for (std::size_t j = 0; j < grid_.n; ++j) w[j] *= ik_[j];
        fft_.inverse(w);
        for (std::size_t i = 0; i < grid_.n; ++i) w[i] *= inv_m_[i];
        fft_.forward(w);
        for (std::size_t j = 0; j < grid_.n; ++j) w[j] *= ik_[j];
        fft_.inverse(w);
        out.resize(grid_.n);
        for (std::size_t i = 0; i < grid_.n; ++i)
            out[i] = -0.5 * hbar_ * hbar_ * w[i] + v_[i] * in[i];
    }

    ComplexField step(const ComplexField& psi) const {
        const Complex lam{0.0, dt_ / (2.0 * hbar_)};
        std::vector<Complex> h(psi.size());
        apply_hamiltonian(psi.values, h);
        std::vector<Complex> rhs(psi.size());
        for (std::size_t i = 0; i < psi.size(); ++i) rhs[i] = psi.values[i] - lam * h[i];

        auto A = [&](const std::vector<Complex>& x, std::vector<Complex>& out) {
            apply_hamiltonian(x, out);
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + lam * out[i];
        };
        ComplexField out(psi.grid, psi.t + dt_);
        out.values = detail::bicgstab(A, rhs, rhs, tol_, max_iter_);
        return out;
    }

private:
    UniformGrid grid_;
    Fft fft_;
    double dt_, hbar_;
    int max_iter_;
    double tol_;
    std::vector<double> v_, inv_m_;
    std::vector<Complex> ik_;
};

inline ComplexField step_nonconstant_mass(const ComplexField& psi, const PotentialSpec& V,
                                          const MassSpec& mass, const PhysicalConstants& k,
                                          double dt) {
    return MassVaryingStepper(psi.grid, V, mass, k, dt).step(psi);
}

// ---------------------------------------------------------------------------
// Pauli with A = 0: Strang split of the spectral kinetic part against the
// pointwise-exact 2x2 exponential of q*phi*I - (q hbar/2m) sigma.B.
// The kinetic_frozen mode drops the kinetic half-steps; it exists to compare
// the Zeeman exponential against the two-level closed form.

class PauliStepper {
public:
    PauliStepper(const UniformGrid& g, const ExternalFieldSpec& fields,
                 const PhysicalConstants& k, double dt, bool kinetic_frozen = false)
        : grid_(g), fft_(g.n), dt_(dt), kinetic_frozen_(kinetic_frozen) {
        const auto phi = fields.phi.values(g, k);
        const auto B = fields.b_values(g);
        u00_.resize(g.n);
        u01_.resize(g.n);
        u10_.resize(g.n);
        u11_.resize(g.n);
        for (std::size_t i = 0; i < g.n; ++i) {
            // exp(-i(alpha I + beta.sigma)) with the half-step angles
            const double alpha = k.charge * phi[i] * dt / (2.0 * k.hbar);
            const double bx = -k.charge * dt / (4.0 * k.mass) * B[0][i];
            const double by = -k.charge * dt / (4.0 * k.mass) * B[1][i];
            const double bz = -k.charge * dt / (4.0 * k.mass) * B[2][i];
            const double bn = std::sqrt(bx * bx + by * by + bz * bz);
            const Complex phase = std::exp(Complex{0.0, -alpha});
            const double cosb = std::cos(bn);
            const double sinc = (bn > 0.0) ? std::sin(bn) / bn : 1.0;
            u00_[i] = phase * Complex{cosb, -sinc * bz};
            u11_[i] = phase * Complex{cosb, sinc * bz};
            u01_[i] = phase * Complex{-sinc * by, -sinc * bx};
            u10_[i] = phase * Complex{sinc * by, -sinc * bx};
        }
        kinetic_.resize(g.n);
        for (std::size_t j = 0; j < g.n; ++j) {
            const double kk = g.wavenumber(j);
            kinetic_[j] = std::exp(Complex{0.0, -k.hbar * kk * kk * dt / (2.0 * k.mass)});
        }
    }

    SpinorField step(const SpinorField& s) const {
        SpinorField out = s;
        apply_potential_half(out);
        if (!kinetic_frozen_) {
            apply_kinetic(out.up.values);
            apply_kinetic(out.down.values);
        }
        apply_potential_half(out);
        out.up.t = s.t() + dt_;
        out.down.t = out.up.t;
        return out;
    }

private:
    void apply_potential_half(SpinorField& s) const {
        for (std::size_t i = 0; i < grid_.n; ++i) {
            const Complex a = s.up.values[i];
            const Complex b = s.down.values[i];
            s.up.values[i] = u00_[i] * a + u01_[i] * b;
            s.down.values[i] = u10_[i] * a + u11_[i] * b;
        }
    }

    void apply_kinetic(std::vector<Complex>& v) const {
        fft_.forward(v);
        for (std::size_t j = 0; j < grid_.n; ++j) v[j] *= kinetic_[j];
        fft_.inverse(v);
    }

    UniformGrid grid_;
    Fft fft_;
    double dt_;
    bool kinetic_frozen_;
    std::vector<Complex> u00_, u01_, u10_, u11_, kinetic_;
};

inline SpinorField step_pauli(const SpinorField& s, const ExternalFieldSpec& fields,
                              const PhysicalConstants& k, double dt) {
    return PauliStepper(s.grid(), fields, k, dt).step(s);
}

// ---------------------------------------------------------------------------
// Free Klein-Gordon: exact per-mode rotation with omega_k = sqrt(c^2 k^2 +
// m^2 c^4 / hbar^2).

class KleinGordonStepper {
public:
    KleinGordonStepper(const UniformGrid& g, const PhysicalConstants& k, double dt)
        : grid_(g), fft_(g.n), dt_(dt) {
        cos_.resize(g.n);
        sin_over_omega_.resize(g.n);
        omega_sin_.resize(g.n);
        for (std::size_t j = 0; j < g.n; ++j) {
            const double om = omega(g, k, j);
            const double th = om * dt;
            cos_[j] = std::cos(th);
            sin_over_omega_[j] = (om > 0.0) ? std::sin(th) / om : dt;
            omega_sin_[j] = om * std::sin(th);
        }
    }

    static double omega(const UniformGrid& g, const PhysicalConstants& k, std::size_t j) {
        const double kk = g.wavenumber(j);
        const double mc2_over_hbar = k.mass * k.c * k.c / k.hbar;
        return std::sqrt(k.c * k.c * kk * kk + mc2_over_hbar * mc2_over_hbar);
    }

    KGState step(const KGState& s) const {
        std::vector<Complex> psi = s.psi.values;
        std::vector<Complex> dpsi = s.dpsi_dt.values;
        fft_.forward(psi);
        fft_.forward(dpsi);
        for (std::size_t j = 0; j < grid_.n; ++j) {
            const Complex a = psi[j];
            const Complex b = dpsi[j];
            psi[j] = cos_[j] * a + sin_over_omega_[j] * b;
            dpsi[j] = -omega_sin_[j] * a + cos_[j] * b;
        }
        fft_.inverse(psi);
        fft_.inverse(dpsi);
        const double t = s.t() + dt_;
        return KGState(ComplexField(grid_, t, std::move(psi)),
                       ComplexField(grid_, t, std::move(dpsi)));
    }

private:
    UniformGrid grid_;
    Fft fft_;
    double dt_;
    std::vector<double> cos_, sin_over_omega_, omega_sin_;
};

inline KGState step_klein_gordon(const KGState& s, const PhysicalConstants& k, double dt) {
    return KleinGordonStepper(s.grid(), k, dt).step(s);
}

/// Conserved functional of the free wave equation:
/// integral of |dpsi/dt|^2/c^2 + |grad psi|^2 + (m c/hbar)^2 |psi|^2.
inline double kg_energy(const KGState& s, const PhysicalConstants& k) {
    const auto grad_psi = spectral_derivative(s.psi.values, s.grid(), 1);
    const double mc_over_hbar = k.mass * k.c / k.hbar;
    double e = 0.0;
    for (std::size_t i = 0; i < s.psi.size(); ++i) {
        e += std::norm(s.dpsi_dt.values[i]) / (k.c * k.c) + std::norm(grad_psi[i]) +
             mc_over_hbar * mc_over_hbar * std::norm(s.psi.values[i]);
    }
    return e * s.grid().dx();
}

// ---------------------------------------------------------------------------
// Weyl (1-D Dirac): exact per-mode 2x2 exponential of
// (dt/hbar)(m c^2 sigma3 + c hbar k sigma1).

class WeylStepper {
public:
    WeylStepper(const UniformGrid& g, const PhysicalConstants& k, double dt)
        : grid_(g), fft_(g.n), dt_(dt) {
        u00_.resize(g.n);
        u01_.resize(g.n);
        u11_.resize(g.n);
        for (std::size_t j = 0; j < g.n; ++j) {
            const double wx = k.c * g.wavenumber(j) * dt;       // sigma1 angle
            const double wz = k.mass * k.c * k.c * dt / k.hbar; // sigma3 angle
            const double th = std::sqrt(wx * wx + wz * wz);
            const double cosr = std::cos(th);
            const double sinc = (th > 0.0) ? std::sin(th) / th : 1.0;
            u00_[j] = Complex{cosr, -sinc * wz};
            u11_[j] = Complex{cosr, sinc * wz};
            u01_[j] = Complex{0.0, -sinc * wx};
        }
    }

    SpinorField step(const SpinorField& s) const {
        std::vector<Complex> a = s.up.values;
        std::vector<Complex> b = s.down.values;
        fft_.forward(a);
        fft_.forward(b);
        for (std::size_t j = 0; j < grid_.n; ++j) {
            const Complex x = a[j];
            const Complex y = b[j];
            a[j] = u00_[j] * x + u01_[j] * y;
            b[j] = u01_[j] * x + u11_[j] * y;
        }
        fft_.inverse(a);
        fft_.inverse(b);
        const double t = s.t() + dt_;
        return SpinorField(ComplexField(grid_, t, std::move(a)),
                           ComplexField(grid_, t, std::move(b)));
    }

private:
    UniformGrid grid_;
    Fft fft_;
    double dt_;
    std::vector<Complex> u00_, u01_, u11_;
};

inline SpinorField step_weyl(const SpinorField& s, const PhysicalConstants& k, double dt) {
    return WeylStepper(s.grid(), k, dt).step(s);
}

// ---------------------------------------------------------------------------

/// Apply the model's stepper n_steps times from the given initial state,
/// recording every snapshot_stride-th state (the initial state included).
inline SnapshotHistory propagate(const ModelState& initial, const ModelParams& mp,
                                 const UniformGrid& grid, double dt, int n_steps,
                                 int snapshot_stride = 1) {
    if (!(dt > 0.0)) throw ValidationError("dt_positive", "dt must be > 0");
    if (snapshot_stride < 1)
        throw ValidationError("stride_positive", "snapshot_stride must be >= 1");

    SnapshotHistory h;
    h.model = mp.model;
    h.grid = grid;
    h.dt = dt * snapshot_stride;

    std::optional<SchrodingerStepper> schro;
    std::optional<MassVaryingStepper> ncm;
    std::optional<PauliStepper> pauli;
    std::optional<KleinGordonStepper> kg;
    std::optional<WeylStepper> weyl;
    switch (mp.model) {
        case ModelKind::schrodinger:
            schro.emplace(grid, mp.potential, mp.constants, dt);
            break;
        case ModelKind::nonconstant_mass:
            ncm.emplace(grid, mp.potential, mp.mass_profile, mp.constants, dt);
            break;
        case ModelKind::pauli:
            pauli.emplace(grid, mp.external_field.value_or(ExternalFieldSpec{}), mp.constants,
                          dt);
            break;
        case ModelKind::klein_gordon:
            kg.emplace(grid, mp.constants, dt);
            break;
        case ModelKind::weyl:
            weyl.emplace(grid, mp.constants, dt);
            break;
    }

    ModelState state = initial;
    auto record = [&](const ModelState& s) {
        h.times.push_back(state_time(s));
        h.states.push_back(s);
    };
    record(state);
    for (int step = 1; step <= n_steps; ++step) {
        switch (mp.model) {
            case ModelKind::schrodinger:
                state = schro->step(std::get<ComplexField>(state));
                break;
            case ModelKind::nonconstant_mass:
                state = ncm->step(std::get<ComplexField>(state));
                break;
            case ModelKind::pauli:
                state = pauli->step(std::get<SpinorField>(state));
                break;
            case ModelKind::klein_gordon:
                state = kg->step(std::get<KGState>(state));
                break;
            case ModelKind::weyl:
                state = weyl->step(std::get<SpinorField>(state));
                break;
        }
        if (step % snapshot_stride == 0) record(state);
    }
    return h;
}

} // namespace qtraj
