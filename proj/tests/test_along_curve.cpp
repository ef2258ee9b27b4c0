#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "qtraj/along_curve.hpp"
#include "qtraj/fft.hpp"

using namespace qtraj;
using Catch::Approx;

namespace {
const UniformGrid kGrid(-25.0, 25.0, 1024);
constexpr double kPi = std::numbers::pi;
const PhysicalConstants kConsts;

ComplexField plane_wave(const UniformGrid& g, int mode) {
    ComplexField f(g, 0.0);
    const double k = 2.0 * kPi * mode / g.length();
    for (std::size_t i = 0; i < g.n; ++i)
        f.values[i] = std::exp(Complex{0.0, k * g.x(i)}) / std::sqrt(g.length());
    return f;
}

ComplexField gaussian_state(const UniformGrid& g, double x0, double k0, double s0) {
    auto f = oracles::sampled_field(g, 0.0, [&](double x) {
        return oracles::free_gaussian_value(x, 0.0, x0, k0, s0, 1.0, 1.0);
    });
    const double n = f.l2_norm();
    for (auto& v : f.values) v /= n;
    return f;
}

KGState kg_gaussian_state(const UniformGrid& g, double x0, double k0, double s0,
                          double branch = +1.0) {
    auto psi = gaussian_state(g, x0, k0, s0);
    auto hat = psi.values;
    const Fft fft(g.n);
    fft.forward(hat);
    for (std::size_t j = 0; j < g.n; ++j) {
        const double k = g.wavenumber(j);
        const double omega = std::sqrt(k * k + 1.0); // m = c = hbar = 1
        hat[j] *= Complex{0.0, -branch * omega};
    }
    fft.inverse(hat);
    return KGState(psi, ComplexField(g, 0.0, std::move(hat)));
}

double max_rel_density_error(const RunContext& run, const Trajectory& tr) {
    const auto recon = density_along_trajectory(tr, run);
    double err = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < tr.size(); ++j) scale = std::max(scale, tr.samples[j].R);
    for (std::size_t j = 0; j < tr.size(); ++j)
        err = std::max(err, std::abs(recon[j] - tr.samples[j].R));
    return err / scale;
}
} // namespace

TEST_CASE("density reconstruction") {
    SECTION("plane wave: constant amplitude is transported unchanged") {
        ModelParams mp;
        RunContext run(propagate(plane_wave(kGrid, 7), mp, kGrid, 1e-3, 300), mp);
        const auto tr = run.trajectory(2.0);
        const auto recon = density_along_trajectory(tr, run);
        for (std::size_t j = 0; j < tr.size(); ++j)
            REQUIRE(recon[j] == Approx(tr.samples[0].R).epsilon(1e-10));
    }
    SECTION("coherent packet: amplitude constant along each curve") {
        ModelParams mp;
        mp.potential = PotentialSpec::harmonic(1.0);
        mp.eps_node = 1e-4;
        auto psi = oracles::sampled_field(kGrid, 0.0, [&](double x) {
            return oracles::coherent_state_value(x, 0.0, 2.0, 1.0, 1.0, 1.0);
        });
        RunContext run(propagate(psi, mp, kGrid, 1e-3, 500), mp);
        for (double seed : {1.4, 2.0, 2.9}) {
            const auto tr = run.trajectory(seed);
            REQUIRE(tr.status == TrajectoryStatus::completed);
            REQUIRE(max_rel_density_error(run, tr) < 1e-3);
            const auto recon = density_along_trajectory(tr, run);
            for (std::size_t j = 0; j < tr.size(); ++j)
                REQUIRE(recon[j] == Approx(recon[0]).epsilon(1e-4));
        }
    }
    SECTION("free Gaussian over 500 steps") {
        ModelParams mp;
        mp.eps_node = 1e-4;
        RunContext run(propagate(gaussian_state(kGrid, 0.0, 0.0, 1.0), mp, kGrid, 2e-3, 500),
                       mp);
        for (double seed : {-1.5, 0.3, 1.0, 2.0}) {
            const auto tr = run.trajectory(seed);
            REQUIRE(tr.status == TrajectoryStatus::completed);
            REQUIRE(max_rel_density_error(run, tr) < 1e-3);
        }
    }
    SECTION("sinusoidal mass profile") {
        std::vector<double> m(kGrid.n);
        for (std::size_t i = 0; i < kGrid.n; ++i)
            m[i] = 1.0 + 0.3 * std::sin(2.0 * kPi * (kGrid.x(i) - kGrid.x_min) / kGrid.length());
        ModelParams mp;
        mp.model = ModelKind::nonconstant_mass;
        mp.mass_profile = MassSpec::tabulated(m);
        mp.eps_node = 1e-4;
        RunContext run(
            propagate(gaussian_state(kGrid, -5.0, 0.8, 1.5), mp, kGrid, 1e-3, 400), mp);
        for (double seed : {-6.0, -5.0, -4.2}) {
            const auto tr = run.trajectory(seed);
            REQUIRE(tr.status == TrajectoryStatus::completed);
            REQUIRE(max_rel_density_error(run, tr) < 1e-3);
        }
    }
    SECTION("relativistic Gaussian packet") {
        ModelParams mp;
        mp.model = ModelKind::klein_gordon;
        mp.eps_node = 1e-4;
        RunContext run(propagate(kg_gaussian_state(kGrid, 0.0, 0.5, 2.0), mp, kGrid, 2e-3, 500),
                       mp);
        for (double seed : {-1.0, 0.0, 1.5}) {
            const auto tr = run.trajectory(seed);
            REQUIRE(tr.status == TrajectoryStatus::completed);
            REQUIRE(max_rel_density_error(run, tr) < 1e-3);
        }
    }
}

TEST_CASE("action accumulation along curves") {
    SECTION("plane wave at zero potential matches the direct phase") {
        ModelParams mp;
        const int mode = 8;
        RunContext run(propagate(plane_wave(kGrid, mode), mp, kGrid, 1e-3, 500), mp);
        const auto tr = run.trajectory(-4.0);
        const auto acc = action_along_trajectory(tr, run);
        // the sampled action along the curve is the independent route
        for (std::size_t j = 0; j < tr.size(); ++j)
            REQUIRE(std::abs(acc[j] - tr.samples[j].S) < 1e-4 * kConsts.hbar);
        // and the closed form: S grows by +(hbar k)^2/2m * t along the curve
        const double k = 2.0 * kPi * mode / kGrid.length();
        const double rate = kConsts.hbar * kConsts.hbar * k * k / (2.0 * kConsts.mass);
        REQUIRE(acc.back() - acc.front() ==
                Approx(rate * tr.times.back()).epsilon(1e-6));
    }
    SECTION("stationary state accumulates -E t") {
        ModelParams mp;
        mp.potential = PotentialSpec::harmonic(1.0);
        mp.eps_node = 1e-4;
        auto psi = oracles::sampled_field(kGrid, 0.0, [&](double x) {
            return oracles::coherent_state_value(x, 0.0, 0.0, 1.0, 1.0, 1.0);
        });
        RunContext run(propagate(psi, mp, kGrid, 1e-3, 500), mp);
        const auto tr = run.trajectory(0.4);
        const auto acc = action_along_trajectory(tr, run);
        const double E = 0.5; // hbar omega / 2
        for (std::size_t j = 0; j < tr.size(); ++j) {
            REQUIRE(acc[j] - acc[0] == Approx(-E * tr.times[j]).margin(1e-5));
            REQUIRE(std::abs(acc[j] - tr.samples[j].S) < 1e-4 * kConsts.hbar);
        }
    }
    SECTION("zero elapsed time accumulates nothing") {
        ModelParams mp;
        RunContext run(propagate(gaussian_state(kGrid, 0.0, 0.4, 1.5), mp, kGrid, 1e-3, 2),
                       mp);
        const auto tr = run.trajectory(0.2);
        const auto acc = action_along_trajectory(tr, run);
        REQUIRE(acc[0] == Approx(tr.samples[0].S).margin(1e-12));
    }
}

TEST_CASE("trajectory force law") {
    SECTION("plane wave at zero potential: no force, no acceleration") {
        ModelParams mp;
        RunContext run(propagate(plane_wave(kGrid, 8), mp, kGrid, 1e-3, 400), mp);
        const auto rn = newton_residual(run.trajectory(1.0), run);
        REQUIRE(rn.linf < 1e-6);
    }
    SECTION("coherent packet: acceleration tracks the classical center, any seed") {
        const double omega = 1.0, A = 2.0;
        ModelParams mp;
        mp.potential = PotentialSpec::harmonic(omega);
        mp.eps_node = 1e-4;
        auto psi = oracles::sampled_field(kGrid, 0.0, [&](double x) {
            return oracles::coherent_state_value(x, 0.0, A, omega, 1.0, 1.0);
        });
        RunContext run(propagate(psi, mp, kGrid, 2e-3, 500), mp);
        for (double seed : {1.2, 2.0, 2.7}) {
            const auto tr = run.trajectory(seed);
            const double dt = tr.times[1] - tr.times[0];
            for (std::size_t j = 1; j + 1 < tr.size(); ++j) {
                const double acc = (tr.positions[j + 1] - 2.0 * tr.positions[j] +
                                    tr.positions[j - 1]) /
                                   (dt * dt);
                const double expected = -omega * omega * A * std::cos(omega * tr.times[j]);
                REQUIRE(std::abs(acc - expected) < 1e-3 * omega * omega * A);
            }
            // the residual against the engine's own force route agrees too
            REQUIRE(newton_residual(tr, run).linf < 1e-3 * omega * omega * A);
        }
    }
    SECTION("free Gaussian: halving dt improves the residual by the second-order factor") {
        ModelParams mp;
        mp.eps_node = 1e-4;
        auto at_dt = [&](double dt, int steps) {
            RunContext run(propagate(gaussian_state(kGrid, 0.0, 0.0, 1.0), mp, kGrid, dt,
                                     steps),
                           mp);
            return newton_residual(run.trajectory(1.3), run).linf;
        };
        const double coarse = at_dt(4e-3, 250);
        const double fine = at_dt(2e-3, 500);
        REQUIRE(coarse / fine >= 3.5);
    }
    SECTION("flipping the potential force breaks the law (fault hook)") {
        ModelParams mp;
        mp.potential = PotentialSpec::harmonic(1.0);
        mp.eps_node = 1e-4;
        auto psi = oracles::sampled_field(kGrid, 0.0, [&](double x) {
            return oracles::coherent_state_value(x, 0.0, 2.0, 1.0, 1.0, 1.0);
        });
        RunContext run(propagate(psi, mp, kGrid, 2e-3, 500), mp);
        const auto tr = run.trajectory(2.0);
        const double honest = newton_residual(tr, run).relative();
        const double flipped = newton_residual(tr, run, /*flip_potential_force=*/true).relative();
        REQUIRE(flipped > 100.0 * honest);
    }
}

TEST_CASE("spin-branch amplitude transport residual") {
    SECTION("decoupled limit reduces to the scalar transport law") {
        auto base = gaussian_state(kGrid, 0.0, 0.5, 1.5);
        ComplexField zero(kGrid, 0.0);
        SpinorField s(base, zero);
        ModelParams mp;
        mp.model = ModelKind::pauli;
        mp.external_field = ExternalFieldSpec::uniform(PotentialSpec::zero(), {0.0, 0.0, 0.0});
        mp.eps_node = 1e-4;
        RunContext run(propagate(s, mp, kGrid, 1e-3, 300), mp);
        const auto tr = run.trajectory(0.5, 0);
        const auto rn = pauli_dR1_dt_residual(tr, run);
        REQUIRE(rn.linf < 1e-4);
    }
    SECTION("coupled precession: the magnetic term carries the balance") {
        auto base = gaussian_state(kGrid, 0.0, 0.0, 1.5);
        ComplexField up = base, down = base;
        for (auto& v : up.values) v /= std::sqrt(2.0);
        for (auto& v : down.values) v *= Complex{0.0, 1.0} / std::sqrt(2.0); // relative phase pi/2
        SpinorField s(up, down);
        ModelParams mp;
        mp.model = ModelKind::pauli;
        mp.external_field = ExternalFieldSpec::uniform(PotentialSpec::zero(), {2.0, 0.0, 0.0});
        mp.eps_node = 1e-4;
        RunContext run(propagate(s, mp, kGrid, 1e-3, 300), mp);
        const auto tr = run.trajectory(0.5, 0);
        REQUIRE(tr.status == TrajectoryStatus::completed);
        const auto with_coupling = pauli_dR1_dt_residual(tr, run);
        REQUIRE(with_coupling.relative() < 1e-3);
        const auto ablated = pauli_dR1_dt_residual(tr, run, /*include_coupling=*/false);
        REQUIRE(ablated.linf > 10.0 * with_coupling.linf);
    }
}

TEST_CASE("history-integral action equation residuals") {
    SECTION("plane wave: the integrals vanish and the residual is the direct one") {
        ModelParams mp;
        RunContext run(propagate(plane_wave(kGrid, 8), mp, kGrid, 1e-3, 50), mp);
        const auto tr = run.trajectory(3.0);
        const auto res = s_equation_residuals(tr, run);
        for (double r : res) REQUIRE(std::abs(r) < 1e-8);
    }
    SECTION("free Gaussian: small residual over 50 steps, quadratic growth") {
        ModelParams mp;
        mp.eps_node = 1e-4;
        RunContext run(propagate(gaussian_state(kGrid, 0.0, 0.0, 1.0), mp, kGrid, 1e-3, 50),
                       mp);
        const double scale = 0.5; // hbar^2 / 2 m sigma0^2
        const auto seeds = std::vector<double>{-1.8, -1.0, -0.4, 0.0, 0.3, 0.8, 1.2, 1.7, 2.1};
        for (double seed : seeds) {
            const auto tr = run.trajectory(seed);
            REQUIRE(tr.status == TrajectoryStatus::completed);
            const auto res = s_equation_residuals(tr, run);
            REQUIRE(std::abs(res.back()) < 5e-3 * scale);
            // growth no faster than ~t^2 between the half and full span
            REQUIRE(std::abs(res[50]) <= 4.5 * std::abs(res[25]) + 1e-5 * scale);
        }
    }
}

TEST_CASE("spinor characteristic-form residuals along curves") {
    SECTION("massless chirality eigenstate: every form vanishes identically") {
        PhysicalConstants massless;
        massless.mass = 0.0;
        auto base = gaussian_state(kGrid, 0.0, 0.8, 2.0);
        SpinorField s(base, base);
        ModelParams mp;
        mp.model = ModelKind::weyl;
        mp.constants = massless;
        mp.eps_node = 1e-4;

        // the massless curves move at exactly +-c; a grid-commensurate step
        // keeps the sampling offset fixed along each curve
        const double dt = kGrid.dx() / massless.c;
        for (auto family : {WeylFamily::per_component, WeylFamily::full_system}) {
            mp.weyl_family = family;
            // 100 steps: the counter-propagating branch stays inside the
            // translating envelope's unmasked region
            RunContext run(propagate(s, mp, kGrid, dt, 100), mp);
            for (int comp : {0, 1}) {
                const auto tr = run.trajectory(0.5, comp);
                REQUIRE(tr.status == TrajectoryStatus::completed);
                const auto forms = weyl_characteristic_form_residuals(tr, run, family);
                REQUIRE(forms.amplitude.linf < 1e-6);
                REQUIRE(forms.action.linf < 1e-6);
            }
        }
    }
    SECTION("massive two-mode state: forms hold and converge under joint refinement") {
        auto two_mode_state = [&](const UniformGrid& g) {
            const double k1 = 2.0 * kPi * 2.0 / g.length();
            const double k2 = 2.0 * kPi * 5.0 / g.length();
            auto gamma = [](double k) { return 0.5 * std::atan2(k, 1.0); };
            const double g1 = gamma(k1), g2 = gamma(k2);
            ComplexField up(g, 0.0), down(g, 0.0);
            for (std::size_t i = 0; i < g.n; ++i) {
                const double x = g.x(i);
                const Complex e1 = std::exp(Complex{0.0, k1 * x});
                const Complex e2 = std::exp(Complex{0.0, k2 * x});
                up.values[i] = std::cos(g1) * e1 - 0.4 * std::sin(g2) * e2;
                down.values[i] = std::sin(g1) * e1 + 0.4 * std::cos(g2) * e2;
            }
            return SpinorField(up, down);
        };
        auto residual_at = [&](WeylFamily family, std::size_t n, double dt, int steps) {
            const UniformGrid g(-25.0, 25.0, n);
            ModelParams mp;
            mp.model = ModelKind::weyl;
            mp.eps_node = 1e-4;
            mp.weyl_family = family;
            RunContext run(propagate(two_mode_state(g), mp, g, dt, steps), mp);
            const auto tr = run.trajectory(1.0, 0);
            REQUIRE(tr.status == TrajectoryStatus::completed);
            const auto forms = weyl_characteristic_form_residuals(tr, run, family);
            return std::max(forms.amplitude.relative(), forms.action.relative());
        };
        for (auto family : {WeylFamily::per_component, WeylFamily::full_system}) {
            const double coarse = residual_at(family, 512, 4e-3, 150);
            const double fine = residual_at(family, 1024, 2e-3, 300);
            REQUIRE(coarse < 1e-3);
            REQUIRE(coarse / fine >= 3.5);
        }
    }

    SECTION("the two families trace different curves from the same state") {
        auto up = gaussian_state(kGrid, 0.0, 0.5, 2.0);
        auto down = gaussian_state(kGrid, 0.0, -0.5, 2.0);
        SpinorField s(up, down);
        ModelParams mp;
        mp.model = ModelKind::weyl;
        mp.eps_node = 1e-4;
        mp.weyl_family = WeylFamily::per_component;
        RunContext pc(propagate(s, mp, kGrid, 1e-3, 300), mp);
        mp.weyl_family = WeylFamily::full_system;
        RunContext fs(propagate(s, mp, kGrid, 1e-3, 300), mp);
        const auto a = pc.trajectory(0.5, 0);
        const auto b = fs.trajectory(0.5, 0);
        REQUIRE(a.status == TrajectoryStatus::completed);
        double max_gap = 0.0;
        for (std::size_t j = 0; j < std::min(a.size(), b.size()); ++j)
            max_gap = std::max(max_gap, std::abs(a.positions[j] - b.positions[j]));
        REQUIRE(max_gap > 10.0 * kGrid.dx());
    }
}
