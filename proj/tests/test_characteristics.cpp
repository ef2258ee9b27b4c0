#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "qtraj/run_context.hpp"
#include "qtraj/trajectory.hpp"
#include "qtraj/velocity.hpp"

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
} // namespace

TEST_CASE("velocity of a real field vanishes; a plane wave moves at hbar k/m") {
    const auto still = velocity_schrodinger(
        polar_decompose(gaussian_state(kGrid, 0.0, 0.0, 2.0), 1e-6), kConsts);
    for (std::size_t i = 0; i < still.v.size(); ++i)
        if (still.defined[i]) REQUIRE(still.v[i] == Approx(0.0).margin(1e-8));

    const int mode = 9;
    const double k = 2.0 * kPi * mode / kGrid.length();
    const auto moving = velocity_schrodinger(polar_decompose(plane_wave(kGrid, mode), 1e-6),
                                             kConsts);
    for (std::size_t i = 0; i < moving.v.size(); ++i) {
        REQUIRE(moving.defined[i]);
        REQUIRE(std::abs(moving.v[i] - kConsts.hbar * k / kConsts.mass) < 1e-10);
    }
}

TEST_CASE("free-Gaussian velocity field matches the spreading closed form") {
    const double s0 = 1.0, t = 0.7;
    const auto f = oracles::sampled_field(kGrid, t, [&](double x) {
        return oracles::free_gaussian_value(x, t, 0.0, 0.0, s0, 1.0, 1.0);
    });
    const auto vel = velocity_schrodinger(polar_decompose(f, 1e-4), kConsts);
    const double tau = t / (2.0 * s0 * s0);
    const double rate = (tau / (1.0 + tau * tau)) / (2.0 * s0 * s0); // sigma'/sigma
    for (std::size_t i = 0; i < vel.v.size(); ++i) {
        if (!vel.defined[i]) continue;
        REQUIRE(vel.v[i] == Approx(kGrid.x(i) * rate).margin(1e-5));
    }
}

TEST_CASE("variable-mass velocity identities") {
    std::vector<double> m(kGrid.n);
    for (std::size_t i = 0; i < kGrid.n; ++i)
        m[i] = 1.0 + 0.3 * std::sin(2.0 * kPi * (kGrid.x(i) - kGrid.x_min) / kGrid.length());
    const auto mass = MassSpec::tabulated(m);

    SECTION("constant profile reduces to the constant-mass velocity") {
        const auto p = polar_decompose(gaussian_state(kGrid, 1.0, 0.7, 1.5), 1e-6);
        const auto a = velocity_schrodinger(p, kConsts);
        const auto b = velocity_nonconstant_mass(p, MassSpec::constant(), kConsts);
        for (std::size_t i = 0; i < a.v.size(); ++i)
            if (a.defined[i]) REQUIRE(b.v[i] == Approx(a.v[i]).margin(1e-12));
    }
    SECTION("plane wave: v(x) = hbar k / m(x)") {
        const int mode = 7;
        const double k = 2.0 * kPi * mode / kGrid.length();
        const auto vel = velocity_nonconstant_mass(
            polar_decompose(plane_wave(kGrid, mode), 1e-6), mass, kConsts);
        for (std::size_t i = 0; i < vel.v.size(); ++i)
            REQUIRE(vel.v[i] == Approx(kConsts.hbar * k / m[i]).epsilon(1e-9));
    }
    SECTION("v m(x) equals the action gradient from a direct mode-sum route") {
        const auto ms = oracles::random_mode_sum(kGrid, 19, kGrid.n / 64, 12.0);
        const auto f = oracles::sampled_mode_sum(ms, kGrid);
        const auto p = polar_decompose(f, 1e-6);
        const auto vel = velocity_nonconstant_mass(p, mass, kConsts);
        for (std::size_t i = 0; i < kGrid.n; ++i) {
            if (!vel.defined[i]) continue;
            const double exact = ms.grad_S(kGrid.x(i));
            REQUIRE(vel.v[i] * m[i] == Approx(exact).margin(1e-9 * (1.0 + std::abs(exact))));
        }
    }
}

TEST_CASE("spin-branch velocities") {
    SECTION("identical components reproduce the scalar velocity on both branches") {
        const auto base = gaussian_state(kGrid, 0.5, 0.8, 1.5);
        SpinorField s(base, base);
        const auto pr = polar_decompose_spinor(s, 1e-6);
        const auto both = velocity_pauli(pr.first, pr.second, kConsts);
        const auto ref = velocity_schrodinger(polar_decompose(base, 1e-6), kConsts);
        for (std::size_t i = 0; i < kGrid.n; ++i) {
            if (!ref.defined[i]) continue;
            REQUIRE(both[0].v[i] == Approx(ref.v[i]).margin(1e-12));
            REQUIRE(both[1].v[i] == Approx(ref.v[i]).margin(1e-12));
        }
    }
    SECTION("a vanishing branch has an empty defined mask and rejects seeds") {
        const auto base = gaussian_state(kGrid, 0.0, 0.0, 2.0);
        ComplexField zero(kGrid, 0.0);
        SpinorField s(base, zero);
        const auto pr = polar_decompose_spinor(s, 1e-6);
        const auto both = velocity_pauli(pr.first, pr.second, kConsts);
        REQUIRE(std::count(both[1].defined.begin(), both[1].defined.end(), 1) == 0);

        VelocityHistory vh;
        vh.component = 1;
        vh.stack.grid = kGrid;
        vh.stack.times = {0.0, 1e-3};
        vh.stack.values = {both[1].v, both[1].v};
        vh.stack.defined = {both[1].defined, both[1].defined};
        REQUIRE_THROWS_AS(integrate_trajectory(vh, 0.0), SeedUndefinedError);
    }
}

TEST_CASE("relativistic scalar velocity") {
    auto kg_mode_state = [&](int mode, double amp, double branch) {
        const double k = 2.0 * kPi * mode / kGrid.length();
        const double omega = branch * std::sqrt(k * k + 1.0);
        ComplexField psi(kGrid, 0.0), dpsi(kGrid, 0.0);
        for (std::size_t i = 0; i < kGrid.n; ++i) {
            const Complex u = amp * std::exp(Complex{0.0, k * kGrid.x(i)});
            psi.values[i] = u;
            dpsi.values[i] = Complex{0.0, -omega} * u;
        }
        return KGState(psi, dpsi);
    };

    SECTION("single mode: v = c^2 k / omega, strictly subluminal") {
        const int mode = 12;
        const double k = 2.0 * kPi * mode / kGrid.length();
        const double omega = std::sqrt(k * k + 1.0);
        const auto st = kg_mode_state(mode, 1.0, +1.0);
        const auto p = polar_decompose(st.psi, 1e-6);
        const auto vel =
            velocity_klein_gordon(p, kg_dS_dt(st, p.node_mask, kConsts.hbar), kConsts);
        for (std::size_t i = 0; i < vel.v.size(); ++i) {
            REQUIRE(vel.defined[i]);
            REQUIRE(vel.v[i] == Approx(k / omega).margin(1e-10));
            REQUIRE(std::abs(vel.v[i]) < kConsts.c);
        }
    }
    SECTION("standing wave: zero velocity where defined") {
        const int mode = 6;
        const double k = 2.0 * kPi * mode / kGrid.length();
        const double omega = std::sqrt(k * k + 1.0);
        ComplexField psi(kGrid, 0.0), dpsi(kGrid, 0.0);
        for (std::size_t i = 0; i < kGrid.n; ++i) {
            psi.values[i] = 2.0 * std::cos(k * kGrid.x(i));
            dpsi.values[i] = Complex{0.0, -omega} * psi.values[i];
        }
        const KGState st(psi, dpsi);
        const auto p = polar_decompose(st.psi, 1e-3);
        const auto vel =
            velocity_klein_gordon(p, kg_dS_dt(st, p.node_mask, kConsts.hbar), kConsts);
        for (std::size_t i = 0; i < vel.v.size(); ++i)
            if (vel.defined[i]) REQUIRE(vel.v[i] == Approx(0.0).margin(1e-9));
    }
    SECTION("two-mode state matches the closed-form phase ratio, superluminal points flagged") {
        const int m1 = 6, m2 = 14;
        const double k1 = 2.0 * kPi * m1 / kGrid.length();
        const double k2 = 2.0 * kPi * m2 / kGrid.length();
        const double w1 = std::sqrt(k1 * k1 + 1.0);
        const double w2 = std::sqrt(k2 * k2 + 1.0);
        const double a = 1.0, b = 0.8;
        ComplexField psi(kGrid, 0.0), dpsi(kGrid, 0.0);
        for (std::size_t i = 0; i < kGrid.n; ++i) {
            const double x = kGrid.x(i);
            const Complex u1 = a * std::exp(Complex{0.0, k1 * x});
            const Complex u2 = b * std::exp(Complex{0.0, k2 * x});
            psi.values[i] = u1 + u2;
            dpsi.values[i] = Complex{0.0, -w1} * u1 + Complex{0.0, -w2} * u2;
        }
        const KGState st(psi, dpsi);
        const auto p = polar_decompose(st.psi, 1e-6);
        const auto vel =
            velocity_klein_gordon(p, kg_dS_dt(st, p.node_mask, kConsts.hbar), kConsts);

        std::size_t superluminal = 0;
        for (std::size_t i = 0; i < kGrid.n; ++i) {
            if (!vel.defined[i]) continue;
            // independent closed-form route: plain complex arithmetic
            const double x = kGrid.x(i);
            const Complex u1 = a * std::exp(Complex{0.0, k1 * x});
            const Complex u2 = b * std::exp(Complex{0.0, k2 * x});
            const Complex num_x = Complex{0.0, 1.0} * (k1 * u1 + k2 * u2);
            const Complex num_t = Complex{0.0, -1.0} * (w1 * u1 + w2 * u2);
            const double grad_S = std::imag(num_x / (u1 + u2));
            const double dt_S = std::imag(num_t / (u1 + u2));
            const double expected = -grad_S / dt_S;
            REQUIRE(vel.v[i] == Approx(expected).margin(1e-8));
            if (std::abs(vel.v[i]) > kConsts.c) ++superluminal;
        }
        REQUIRE(superluminal > 0);
    }
}

TEST_CASE("spinor transport velocities") {
    auto two_phase_spinor = [&](double phase_diff) {
        // S1 - S2 = phase_diff * hbar at every point
        const int mode = 5;
        ComplexField up = plane_wave(kGrid, mode);
        ComplexField down = up;
        for (auto& v : down.values) v *= std::exp(Complex{0.0, -phase_diff});
        return SpinorField(up, down);
    };

    SECTION("quarter-period phase differences freeze the branch velocity") {
        for (int n = -2; n <= 2; ++n) {
            const double diff = (2 * n + 1) * kPi / 2.0; // (2n+1) h/4 in action units
            const auto pr = polar_decompose_spinor(two_phase_spinor(diff), 1e-6);
            const auto both = velocity_weyl_per_component(pr.first, pr.second, kConsts);
            for (std::size_t i = 0; i < kGrid.n; ++i) {
                REQUIRE(std::abs(both[0].v[i]) < 1e-10);
                REQUIRE(std::abs(both[1].v[i]) < 1e-10);
            }
        }
    }
    SECTION("half-period phase differences saturate the branch speed at c") {
        for (int n = -2; n <= 2; ++n) {
            const double diff = n * kPi; // n h/2
            const auto pr = polar_decompose_spinor(two_phase_spinor(diff), 1e-6);
            const auto both = velocity_weyl_per_component(pr.first, pr.second, kConsts);
            for (std::size_t i = 0; i < kGrid.n; ++i)
                REQUIRE(std::abs(both[0].v[i]) == Approx(kConsts.c).margin(1e-10));
        }
    }
    SECTION("branch velocities are opposite and bounded by c") {
        const auto up = gaussian_state(kGrid, 0.0, 1.0, 2.0);
        auto down = gaussian_state(kGrid, 0.3, -0.6, 2.4);
        SpinorField s(up, down);
        const auto pr = polar_decompose_spinor(s, 1e-6);
        const auto both = velocity_weyl_per_component(pr.first, pr.second, kConsts);
        for (std::size_t i = 0; i < kGrid.n; ++i) {
            if (!both[0].defined[i]) continue;
            REQUIRE(both[1].v[i] == Approx(-both[0].v[i]).margin(1e-14));
            REQUIRE(std::abs(both[0].v[i]) <= kConsts.c + 1e-14);
        }
    }
    SECTION("whole-system family is exactly +-c") {
        const auto both = velocity_weyl_full(kGrid, 0.0, kConsts);
        for (std::size_t i = 0; i < kGrid.n; ++i) {
            REQUIRE(both[0].v[i] == kConsts.c);
            REQUIRE(both[1].v[i] == -kConsts.c);
        }
    }
}

TEST_CASE("space-time sampling of velocity stacks") {
    SECTION("a uniform field is reproduced exactly anywhere") {
        FieldStack st;
        st.grid = kGrid;
        st.times = {0.0, 0.1};
        st.values = {std::vector<double>(kGrid.n, 1.7), std::vector<double>(kGrid.n, 1.7)};
        VelocityHistory vh{st, 0};
        REQUIRE(sample_velocity(vh, -13.123, 0.037) == Approx(1.7).margin(1e-14));
    }
    SECTION("grid points are reproduced exactly") {
        std::vector<double> v(kGrid.n);
        for (std::size_t i = 0; i < kGrid.n; ++i)
            v[i] = std::sin(2.0 * kPi * (kGrid.x(i) - kGrid.x_min) / kGrid.length());
        FieldStack st;
        st.grid = kGrid;
        st.times = {0.0, 0.1};
        st.values = {v, v};
        VelocityHistory vh{st, 0};
        REQUIRE(sample_velocity(vh, kGrid.x(137), 0.0) == Approx(v[137]).margin(1e-14));
    }
    SECTION("halving dx improves interpolation by the cubic-order factor") {
        auto midpoint_error = [&](std::size_t n) {
            const UniformGrid g(-25.0, 25.0, n);
            std::vector<double> v(g.n);
            const double k = 2.0 * kPi * 3.0 / g.length();
            for (std::size_t i = 0; i < g.n; ++i) v[i] = std::sin(k * g.x(i));
            FieldStack st;
            st.grid = g;
            st.times = {0.0, 1.0};
            st.values = {v, v};
            VelocityHistory vh{st, 0};
            double err = 0.0;
            for (int s = 0; s < 200; ++s) {
                const double x = -20.0 + 0.17 * s;
                err = std::max(err, std::abs(sample_velocity(vh, x, 0.0) - std::sin(k * (x))));
            }
            return err;
        };
        const double ratio = midpoint_error(128) / midpoint_error(256);
        REQUIRE(ratio >= 6.0);
    }
}

TEST_CASE("trajectories on analytic scenarios") {
    SECTION("still field: the curve stays at its seed") {
        ModelParams mp;
        const auto h = propagate(gaussian_state(kGrid, 0.0, 0.0, 2.0), mp, kGrid, 1e-3, 0);
        // single snapshot: duplicate it to give the integrator a time span
        RunContext run(propagate(gaussian_state(kGrid, 0.0, 0.0, 2.0), mp, kGrid, 1e-3, 10),
                       mp);
        const auto tr = run.trajectory(0.5);
        REQUIRE(tr.status == TrajectoryStatus::completed);
        for (double x : tr.positions) REQUIRE(x == Approx(0.5).margin(1e-6));
    }
    SECTION("plane wave: uniform drift at hbar k/m") {
        const int mode = 8;
        const double k = 2.0 * kPi * mode / kGrid.length();
        ModelParams mp;
        RunContext run(propagate(plane_wave(kGrid, mode), mp, kGrid, 1e-3, 500), mp);
        const auto tr = run.trajectory(-3.0);
        REQUIRE(tr.status == TrajectoryStatus::completed);
        for (std::size_t j = 0; j < tr.size(); ++j) {
            const double expected = kGrid.wrap(-3.0 + k * tr.times[j]);
            REQUIRE(tr.positions[j] == Approx(expected).margin(1e-8));
        }
    }
    SECTION("free Gaussian follows the width-scaling law") {
        ModelParams mp;
        RunContext run(propagate(gaussian_state(kGrid, 0.0, 0.0, 1.0), mp, kGrid, 2e-3, 500),
                       mp);
        for (double seed : {0.5, 1.0, 1.8, -1.3}) {
            const auto tr = run.trajectory(seed);
            REQUIRE(tr.status == TrajectoryStatus::completed);
            for (std::size_t j = 0; j < tr.size(); ++j) {
                const double expected =
                    oracles::free_gaussian_trajectory(seed, tr.times[j], 0.0, 1.0, 1.0, 1.0);
                REQUIRE(std::abs(tr.positions[j] - expected) <=
                        1e-3 * std::max(std::abs(expected), 0.1));
            }
        }
    }
    SECTION("curves drifting into an undefined region abort with the recorded status") {
        // synthetic stack: unit drift into a static undefined hole
        FieldStack st;
        st.grid = kGrid;
        std::vector<double> v(kGrid.n, 1.0);
        std::vector<std::uint8_t> def(kGrid.n, 1);
        for (std::size_t i = 600; i < 620; ++i) def[i] = 0;
        for (int j = 0; j <= 400; ++j) {
            st.times.push_back(j * 1e-2);
            st.values.push_back(v);
            st.defined.push_back(def);
        }
        VelocityHistory vh{st, 0};
        const auto tr = integrate_trajectory(vh, kGrid.x(560));
        REQUIRE(tr.status == TrajectoryStatus::aborted_near_node);
        REQUIRE(tr.size() < st.times.size());
        // it stopped just short of the hole
        REQUIRE(tr.positions.back() < kGrid.x(600));
        REQUIRE(tr.positions.back() > kGrid.x(590));
    }
}

TEST_CASE("trajectory ensembles preserve ordering and translate equivariantly") {
    ModelParams mp;
    mp.potential = PotentialSpec::harmonic(1.0);
    auto coherent = oracles::sampled_field(kGrid, 0.0, [&](double x) {
        return oracles::coherent_state_value(x, 0.0, 2.0, 1.0, 1.0, 1.0);
    });
    RunContext run(propagate(coherent, mp, kGrid, 2e-3, 500), mp);

    SECTION("non-crossing") {
        std::vector<double> seeds{1.2, 1.6, 2.0, 2.4, 2.8};
        std::vector<Trajectory> trs;
        for (double s : seeds) trs.push_back(run.trajectory(s));
        for (std::size_t j = 0; j < trs.front().size(); ++j)
            for (std::size_t a = 0; a + 1 < trs.size(); ++a)
                REQUIRE(trs[a].positions[j] < trs[a + 1].positions[j]);
    }
    SECTION("shifting the packet by whole cells shifts every curve by the same amount") {
        const double shift = 32.0 * kGrid.dx();
        ModelParams mp_free; // free packet, translation-invariant dynamics
        RunContext base(
            propagate(gaussian_state(kGrid, 0.0, 0.0, 1.2), mp_free, kGrid, 2e-3, 300),
            mp_free);
        RunContext moved(
            propagate(gaussian_state(kGrid, shift, 0.0, 1.2), mp_free, kGrid, 2e-3, 300),
            mp_free);
        const auto a = base.trajectory(0.7);
        const auto b = moved.trajectory(0.7 + shift);
        REQUIRE(a.size() == b.size());
        for (std::size_t j = 0; j < a.size(); ++j)
            REQUIRE(b.positions[j] - a.positions[j] == Approx(shift).margin(1e-6));
    }
}

TEST_CASE("quantile seeding inverts the initial distribution") {
    const double s0 = 1.5;
    const auto f = gaussian_state(kGrid, 0.0, 0.0, s0);
    std::vector<double> density(kGrid.n);
    for (std::size_t i = 0; i < kGrid.n; ++i) density[i] = std::norm(f.values[i]);
    const int n = 32;
    const auto seeds = quantile_seeds(density, kGrid, n);
    REQUIRE(seeds.size() == static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double p = (i + 0.5) / n;
        const double expected = s0 * std::numbers::sqrt2 * oracles::erf_inv(2.0 * p - 1.0);
        REQUIRE(seeds[static_cast<std::size_t>(i)] ==
                Approx(expected).margin(2.0 * kGrid.dx()));
    }
    // deterministic and sorted
    const auto again = quantile_seeds(density, kGrid, n);
    REQUIRE(seeds == again);
    REQUIRE(std::is_sorted(seeds.begin(), seeds.end()));
}

TEST_CASE("whole-system spinor curves are exact lines") {
    auto up = gaussian_state(kGrid, 0.0, 0.5, 2.0);
    auto down = gaussian_state(kGrid, 0.0, -0.5, 2.0);
    SpinorField s(up, down);
    ModelParams mp;
    mp.model = ModelKind::weyl;
    mp.weyl_family = WeylFamily::full_system;
    RunContext run(propagate(s, mp, kGrid, 1e-3, 400), mp);
    for (int comp : {0, 1}) {
        const auto tr = run.trajectory(1.0, comp);
        REQUIRE(tr.status == TrajectoryStatus::completed);
        const double v = comp == 0 ? kConsts.c : -kConsts.c;
        for (std::size_t j = 0; j < tr.size(); ++j)
            REQUIRE(tr.positions[j] ==
                    Approx(kGrid.wrap(1.0 + v * tr.times[j])).margin(1e-9));
    }
}
