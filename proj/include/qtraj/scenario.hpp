#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qtraj/errors.hpp"
#include "qtraj/fft.hpp"
#include "qtraj/field.hpp"
#include "qtraj/grid.hpp"
#include "qtraj/propagators.hpp"
#include "qtraj/run_context.hpp"

namespace qtraj {

using Json = nlohmann::ordered_json;

/// Built-in initial state families.
struct InitialStateSpec {
    enum class Kind { plane_wave, gaussian, spinor_gaussian, kg_gaussian };
    enum class Branch { positive, negative };

    Kind kind = Kind::gaussian;
    double k = 0.0; // plane_wave
    double x0 = 0.0;
    double k0 = 0.0;
    double sigma0 = 1.0;
    std::array<double, 2> amplitudes{1.0, 0.0}; // spinor_gaussian
    double relative_phase = 0.0;                // spinor_gaussian
    Branch frequency_branch = Branch::positive; // kg_gaussian
};

/// Full simulation description. `params` carries everything the dynamics
/// needs; the rest drives propagation, seeding and the check registry.
struct Scenario {
    std::string name;
    UniformGrid grid{-1.0, 1.0, 2};
    ModelParams params;
    InitialStateSpec initial_state;
    double dt = 1e-3;
    int n_steps = 0;
    int snapshot_stride = 1;
    std::vector<std::pair<double, int>> trajectory_seeds;
    std::map<std::string, double> tolerances;

    ModelKind model() const { return params.model; }
};

namespace detail {

inline ModelKind model_from_string(const std::string& s) {
    if (s == "schrodinger") return ModelKind::schrodinger;
    if (s == "nonconstant_mass") return ModelKind::nonconstant_mass;
    if (s == "pauli") return ModelKind::pauli;
    if (s == "klein_gordon") return ModelKind::klein_gordon;
    if (s == "weyl") return ModelKind::weyl;
    throw ValidationError("model", "unknown model: " + s);
}

inline PotentialSpec potential_from_json(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zero") return PotentialSpec::zero();
    if (kind == "harmonic")
        return PotentialSpec::harmonic(j.at("omega").get<double>(),
                                       j.value("center", 0.0));
    if (kind == "gaussian_barrier")
        return PotentialSpec::gaussian_barrier(j.at("height").get<double>(),
                                               j.at("width").get<double>(),
                                               j.at("center").get<double>());
    if (kind == "tabulated")
        return PotentialSpec::tabulated(j.at("values").get<std::vector<double>>());
    throw ValidationError("potential_kind", "unknown potential kind: " + kind);
}

inline Json potential_to_json(const PotentialSpec& p) {
    Json j;
    switch (p.kind) {
        case PotentialSpec::Kind::zero:
            j["kind"] = "zero";
            break;
        case PotentialSpec::Kind::harmonic:
            j["kind"] = "harmonic";
            j["omega"] = p.omega;
            j["center"] = p.center;
            break;
        case PotentialSpec::Kind::gaussian_barrier:
            j["kind"] = "gaussian_barrier";
            j["height"] = p.height;
            j["width"] = p.width;
            j["center"] = p.center;
            break;
        case PotentialSpec::Kind::tabulated:
            j["kind"] = "tabulated";
            j["values"] = p.table;
            break;
    }
    return j;
}

template <class T>
T require_key(const Json& j, const std::string& key, const char* where) {
    if (!j.contains(key))
        throw ParseError(std::string(where) + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string(where) + ": bad value for '" + key + "': " + e.what());
    }
}

} // namespace detail

/// Nearest exact grid mode for a requested wavenumber; rejects values that
/// are not periodic on the grid.
inline double snap_to_grid_mode(double k, const UniformGrid& g) {
    const double mode = k * g.length() / (2.0 * std::numbers::pi);
    const double rounded = std::round(mode);
    if (std::abs(mode - rounded) > 1e-9 * std::max(1.0, std::abs(mode)))
        throw ValidationError("plane_wave_mode",
                              "plane-wave k must be an integer grid mode (2 pi n / L)");
    return 2.0 * std::numbers::pi * rounded / g.length();
}

inline void validate_scenario(const Scenario& s) {
    const auto& mp = s.params;
    mp.constants.validate(/*mass_may_vanish=*/mp.relativistic());

    if (!(s.dt > 0.0)) throw ValidationError("dt_positive", "dt must be > 0");
    if (s.n_steps < 0) throw ValidationError("steps_nonnegative", "n_steps must be >= 0");
    if (s.snapshot_stride < 1)
        throw ValidationError("stride_positive", "snapshot_stride must be >= 1");
    if (!(mp.eps_node > 0.0 && mp.eps_node < 1.0))
        throw ValidationError("eps_node_range", "eps_node must lie in (0, 1)");

    // model-specific fields present exactly when required
    if (mp.mass_profile.kind == MassSpec::Kind::tabulated &&
        mp.model != ModelKind::nonconstant_mass)
        throw ValidationError("model_fields",
                              "mass_profile is only meaningful for nonconstant_mass");
    if (mp.external_field.has_value() && mp.model != ModelKind::pauli)
        throw ValidationError("model_fields", "external_field is only meaningful for pauli");
    if (mp.model == ModelKind::pauli && !mp.external_field.has_value())
        throw ValidationError("model_fields", "pauli requires external_field");

    switch (s.initial_state.kind) {
        case InitialStateSpec::Kind::plane_wave:
            if (mp.model == ModelKind::pauli || mp.model == ModelKind::weyl)
                throw ValidationError("initial_state_model",
                                      "spinor models need spinor_gaussian");
            snap_to_grid_mode(s.initial_state.k, s.grid);
            if (std::abs(s.initial_state.k) >= std::numbers::pi / (2.0 * s.grid.dx()))
                throw ValidationError("wavenumber_band", "k outside the resolvable band");
            break;
        case InitialStateSpec::Kind::gaussian:
            if (mp.model != ModelKind::schrodinger && mp.model != ModelKind::nonconstant_mass)
                throw ValidationError("initial_state_model",
                                      "gaussian applies to the scalar first-order models");
            break;
        case InitialStateSpec::Kind::spinor_gaussian:
            if (mp.model != ModelKind::pauli && mp.model != ModelKind::weyl)
                throw ValidationError("initial_state_model",
                                      "spinor_gaussian applies to the spinor models");
            break;
        case InitialStateSpec::Kind::kg_gaussian:
            if (mp.model != ModelKind::klein_gordon)
                throw ValidationError("initial_state_model",
                                      "kg_gaussian applies to klein_gordon");
            break;
    }

    const bool localized = s.initial_state.kind != InitialStateSpec::Kind::plane_wave;
    if (localized) {
        if (s.initial_state.sigma0 < 4.0 * s.grid.dx())
            throw ValidationError("resolvability", "sigma0 must be at least 4 dx");
        if (std::abs(s.initial_state.k0) >= std::numbers::pi / (2.0 * s.grid.dx()))
            throw ValidationError("wavenumber_band", "k0 outside the resolvable band");
        const double v_char = mp.relativistic()
                                  ? mp.constants.c
                                  : std::abs(s.initial_state.k0) * mp.constants.hbar /
                                        mp.constants.mass;
        if (v_char * s.dt * s.n_steps >= 0.5 * s.grid.length())
            throw ValidationError("traversal",
                                  "classical traversal exceeds half the domain (self-wrap)");
    }

    for (const auto& [x0, comp] : s.trajectory_seeds) {
        if (x0 < s.grid.x_min || x0 >= s.grid.x_max)
            throw ValidationError("seeds_in_domain", "trajectory seed outside the domain");
        const bool spinor = mp.model == ModelKind::pauli || mp.model == ModelKind::weyl;
        if (comp < 0 || comp > (spinor ? 1 : 0))
            throw ValidationError("seeds_in_domain", "trajectory seed component out of range");
    }
    for (const auto& [name, tol] : s.tolerances)
        if (!(tol > 0.0))
            throw ValidationError("tolerance_positive", "tolerance for " + name + " must be > 0");

    // eagerly validate tabulated lengths and positivity
    (void)mp.potential.values(s.grid, mp.constants);
    (void)mp.mass_profile.values(s.grid, mp.constants);
    if (mp.external_field) {
        (void)mp.external_field->phi.values(s.grid, mp.constants);
        (void)mp.external_field->b_values(s.grid);
    }
}

inline Scenario parse_scenario(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }

    static const std::vector<std::string> known{
        "name",          "model",         "grid",           "constants",
        "potential",     "mass_profile",  "external_field", "initial_state",
        "dt",            "n_steps",       "snapshot_stride", "trajectory_seeds",
        "weyl_family",   "eps_node",      "tolerances"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ParseError("scenario: unknown key '" + key + "'");
    }

    Scenario s;
    s.name = detail::require_key<std::string>(j, "name", "scenario");
    s.params.model =
        detail::model_from_string(detail::require_key<std::string>(j, "model", "scenario"));

    const Json jg = j.contains("grid") ? j.at("grid") : Json::object();
    s.grid = UniformGrid(detail::require_key<double>(jg, "x_min", "grid"),
                         detail::require_key<double>(jg, "x_max", "grid"),
                         detail::require_key<std::size_t>(jg, "n_points", "grid"));

    if (j.contains("constants")) {
        const Json& jc = j.at("constants");
        s.params.constants.hbar = jc.value("hbar", 1.0);
        s.params.constants.mass = jc.value("mass", 1.0);
        s.params.constants.c = jc.value("c", 1.0);
        s.params.constants.charge = jc.value("charge", 1.0);
    }

    if (j.contains("potential")) s.params.potential = detail::potential_from_json(j.at("potential"));
    if (j.contains("mass_profile")) {
        const Json& jm = j.at("mass_profile");
        const std::string kind = detail::require_key<std::string>(jm, "kind", "mass_profile");
        if (kind == "constant") s.params.mass_profile = MassSpec::constant();
        else if (kind == "tabulated")
            s.params.mass_profile =
                MassSpec::tabulated(detail::require_key<std::vector<double>>(jm, "values",
                                                                             "mass_profile"));
        else throw ValidationError("mass_kind", "unknown mass_profile kind: " + kind);
    }
    if (j.contains("external_field")) {
        const Json& jf = j.at("external_field");
        ExternalFieldSpec f;
        if (jf.contains("phi")) f.phi = detail::potential_from_json(jf.at("phi"));
        if (jf.contains("b_field")) {
            const Json& jb = jf.at("b_field");
            if (jb.is_array()) {
                const auto v = jb.get<std::vector<double>>();
                if (v.size() != 3)
                    throw ParseError("external_field: b_field must have 3 components");
                f.b_uniform = {v[0], v[1], v[2]};
            } else {
                f.tabulated = true;
                f.b_table[0] = detail::require_key<std::vector<double>>(jb, "bx", "b_field");
                f.b_table[1] = detail::require_key<std::vector<double>>(jb, "by", "b_field");
                f.b_table[2] = detail::require_key<std::vector<double>>(jb, "bz", "b_field");
            }
        }
        s.params.external_field = std::move(f);
    }

    const Json ji = detail::require_key<Json>(j, "initial_state", "scenario");
    const std::string kind = detail::require_key<std::string>(ji, "kind", "initial_state");
    auto& st = s.initial_state;
    if (kind == "plane_wave") {
        st.kind = InitialStateSpec::Kind::plane_wave;
        st.k = detail::require_key<double>(ji, "k", "initial_state");
    } else if (kind == "gaussian" || kind == "spinor_gaussian" || kind == "kg_gaussian") {
        st.kind = kind == "gaussian" ? InitialStateSpec::Kind::gaussian
                  : kind == "spinor_gaussian" ? InitialStateSpec::Kind::spinor_gaussian
                                              : InitialStateSpec::Kind::kg_gaussian;
        st.x0 = detail::require_key<double>(ji, "x0", "initial_state");
        st.k0 = detail::require_key<double>(ji, "k0", "initial_state");
        st.sigma0 = detail::require_key<double>(ji, "sigma0", "initial_state");
        if (st.kind == InitialStateSpec::Kind::spinor_gaussian) {
            const auto amps =
                detail::require_key<std::vector<double>>(ji, "amplitudes", "initial_state");
            if (amps.size() != 2)
                throw ParseError("initial_state: amplitudes must have 2 entries");
            st.amplitudes = {amps[0], amps[1]};
            st.relative_phase = ji.value("relative_phase", 0.0);
        }
        if (st.kind == InitialStateSpec::Kind::kg_gaussian) {
            const std::string branch = ji.value("frequency_branch", "positive");
            if (branch == "positive") st.frequency_branch = InitialStateSpec::Branch::positive;
            else if (branch == "negative")
                st.frequency_branch = InitialStateSpec::Branch::negative;
            else throw ValidationError("frequency_branch", "unknown branch: " + branch);
        }
    } else {
        throw ValidationError("initial_state_kind", "unknown initial state kind: " + kind);
    }

    s.dt = detail::require_key<double>(j, "dt", "scenario");
    s.n_steps = detail::require_key<int>(j, "n_steps", "scenario");
    s.snapshot_stride = j.value("snapshot_stride", 1);
    s.params.eps_node = j.value("eps_node", 1e-6);

    if (j.contains("trajectory_seeds")) {
        for (const auto& js : j.at("trajectory_seeds")) {
            s.trajectory_seeds.emplace_back(
                detail::require_key<double>(js, "x0", "trajectory_seeds"),
                js.value("component", 0));
        }
    }

    if (s.params.model == ModelKind::weyl) {
        if (!j.contains("weyl_family"))
            throw ValidationError("weyl_family", "weyl scenarios must choose weyl_family");
        const std::string fam = j.at("weyl_family").get<std::string>();
        if (fam == "per_component") s.params.weyl_family = WeylFamily::per_component;
        else if (fam == "full_system") s.params.weyl_family = WeylFamily::full_system;
        else throw ValidationError("weyl_family", "unknown weyl_family: " + fam);
    } else if (j.contains("weyl_family")) {
        throw ValidationError("model_fields", "weyl_family is only meaningful for weyl");
    }

    if (j.contains("tolerances"))
        for (const auto& [key, value] : j.at("tolerances").items())
            s.tolerances[key] = value.get<double>();

    validate_scenario(s);
    return s;
}

inline Json scenario_to_json(const Scenario& s) {
    Json j;
    j["name"] = s.name;
    j["model"] = to_string(s.params.model);
    j["grid"] = {{"x_min", s.grid.x_min}, {"x_max", s.grid.x_max}, {"n_points", s.grid.n}};
    j["constants"] = {{"hbar", s.params.constants.hbar},
                      {"mass", s.params.constants.mass},
                      {"c", s.params.constants.c},
                      {"charge", s.params.constants.charge}};
    j["potential"] = detail::potential_to_json(s.params.potential);
    if (s.params.mass_profile.kind == MassSpec::Kind::tabulated)
        j["mass_profile"] = {{"kind", "tabulated"}, {"values", s.params.mass_profile.table}};
    if (s.params.external_field) {
        Json jf;
        jf["phi"] = detail::potential_to_json(s.params.external_field->phi);
        if (s.params.external_field->tabulated) {
            jf["b_field"] = {{"bx", s.params.external_field->b_table[0]},
                             {"by", s.params.external_field->b_table[1]},
                             {"bz", s.params.external_field->b_table[2]}};
        } else {
            const auto& b = s.params.external_field->b_uniform;
            jf["b_field"] = {b[0], b[1], b[2]};
        }
        j["external_field"] = std::move(jf);
    }
    Json ji;
    switch (s.initial_state.kind) {
        case InitialStateSpec::Kind::plane_wave:
            ji["kind"] = "plane_wave";
            ji["k"] = s.initial_state.k;
            break;
        case InitialStateSpec::Kind::gaussian:
            ji["kind"] = "gaussian";
            break;
        case InitialStateSpec::Kind::spinor_gaussian:
            ji["kind"] = "spinor_gaussian";
            break;
        case InitialStateSpec::Kind::kg_gaussian:
            ji["kind"] = "kg_gaussian";
            break;
    }
    if (s.initial_state.kind != InitialStateSpec::Kind::plane_wave) {
        ji["x0"] = s.initial_state.x0;
        ji["k0"] = s.initial_state.k0;
        ji["sigma0"] = s.initial_state.sigma0;
        if (s.initial_state.kind == InitialStateSpec::Kind::spinor_gaussian) {
            ji["amplitudes"] = {s.initial_state.amplitudes[0], s.initial_state.amplitudes[1]};
            ji["relative_phase"] = s.initial_state.relative_phase;
        }
        if (s.initial_state.kind == InitialStateSpec::Kind::kg_gaussian)
            ji["frequency_branch"] =
                s.initial_state.frequency_branch == InitialStateSpec::Branch::positive
                    ? "positive"
                    : "negative";
    }
    j["initial_state"] = std::move(ji);
    j["dt"] = s.dt;
    j["n_steps"] = s.n_steps;
    j["snapshot_stride"] = s.snapshot_stride;
    Json seeds = Json::array();
    for (const auto& [x0, comp] : s.trajectory_seeds)
        seeds.push_back({{"x0", x0}, {"component", comp}});
    j["trajectory_seeds"] = std::move(seeds);
    if (s.params.model == ModelKind::weyl)
        j["weyl_family"] = to_string(s.params.weyl_family);
    j["eps_node"] = s.params.eps_node;
    if (!s.tolerances.empty()) {
        Json jt;
        for (const auto& [key, value] : s.tolerances) jt[key] = value;
        j["tolerances"] = std::move(jt);
    }
    return j;
}

inline std::string serialize_scenario(const Scenario& s) { return scenario_to_json(s).dump(2); }

/// Model state built from an initial-state description, normalized to unit
/// total probability.
inline ModelState build_initial_state(const InitialStateSpec& spec, const UniformGrid& g,
                                      const PhysicalConstants& k, ModelKind model) {
    auto gaussian = [&](double x0, double k0, double s0) {
        ComplexField f(g, 0.0);
        for (std::size_t i = 0; i < g.n; ++i) {
            const double d = g.x(i) - x0;
            f.values[i] = std::exp(Complex{-d * d / (4.0 * s0 * s0), k0 * g.x(i)});
        }
        const double n = f.l2_norm();
        for (auto& v : f.values) v /= n;
        return f;
    };

    switch (spec.kind) {
        case InitialStateSpec::Kind::plane_wave: {
            const double kk = snap_to_grid_mode(spec.k, g);
            ComplexField f(g, 0.0);
            for (std::size_t i = 0; i < g.n; ++i)
                f.values[i] = std::exp(Complex{0.0, kk * g.x(i)}) / std::sqrt(g.length());
            if (model == ModelKind::klein_gordon) {
                const double omega =
                    std::sqrt(k.c * k.c * kk * kk +
                              std::pow(k.mass * k.c * k.c / k.hbar, 2));
                ComplexField dpsi(g, 0.0);
                for (std::size_t i = 0; i < g.n; ++i)
                    dpsi.values[i] = Complex{0.0, -omega} * f.values[i];
                return KGState(std::move(f), std::move(dpsi));
            }
            return f;
        }
        case InitialStateSpec::Kind::gaussian:
            return gaussian(spec.x0, spec.k0, spec.sigma0);
        case InitialStateSpec::Kind::spinor_gaussian: {
            auto base = gaussian(spec.x0, spec.k0, spec.sigma0);
            const double norm = std::hypot(spec.amplitudes[0], spec.amplitudes[1]);
            ComplexField up = base, down = base;
            for (auto& v : up.values) v *= spec.amplitudes[0] / norm;
            const Complex phase =
                std::exp(Complex{0.0, spec.relative_phase}) * (spec.amplitudes[1] / norm);
            for (auto& v : down.values) v *= phase;
            return SpinorField(std::move(up), std::move(down));
        }
        case InitialStateSpec::Kind::kg_gaussian: {
            auto psi = gaussian(spec.x0, spec.k0, spec.sigma0);
            auto hat = psi.values;
            const Fft fft(g.n);
            fft.forward(hat);
            const double branch =
                spec.frequency_branch == InitialStateSpec::Branch::positive ? 1.0 : -1.0;
            for (std::size_t j = 0; j < g.n; ++j) {
                const double kk = g.wavenumber(j);
                const double omega =
                    std::sqrt(k.c * k.c * kk * kk + std::pow(k.mass * k.c * k.c / k.hbar, 2));
                hat[j] *= Complex{0.0, -branch * omega};
            }
            fft.inverse(hat);
            return KGState(std::move(psi), ComplexField(g, 0.0, std::move(hat)));
        }
    }
    throw Error("build_initial_state: unreachable");
}

/// Propagate a scenario and wrap the result for the characteristics engine.
inline RunContext run_scenario(const Scenario& s) {
    const auto initial =
        build_initial_state(s.initial_state, s.grid, s.params.constants, s.params.model);
    return RunContext(propagate(initial, s.params, s.grid, s.dt, s.n_steps, s.snapshot_stride),
                      s.params);
}

} // namespace qtraj
