#pragma once

#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "qtraj/field.hpp"
#include "qtraj/interp.hpp"
#include "qtraj/polar.hpp"
#include "qtraj/propagators.hpp"
#include "qtraj/quantum_terms.hpp"
#include "qtraj/trajectory.hpp"
#include "qtraj/velocity.hpp"

namespace qtraj {

/// Read-only view over one propagated history with memoized derived fields:
/// time-aligned polar snapshots, velocity stacks, along-curve sample stacks
/// and per-snapshot total potentials. Not thread-safe; build one per run.
class RunContext {
public:
    RunContext(SnapshotHistory history, ModelParams params)
        : history_(std::move(history)), params_(std::move(params)) {}

    const SnapshotHistory& history() const { return history_; }
    const ModelParams& params() const { return params_; }
    const PhysicalConstants& constants() const { return params_.constants; }
    const UniformGrid& grid() const { return history_.grid; }
    double dt() const { return history_.dt; }
    int components() const {
        return (params_.model == ModelKind::pauli || params_.model == ModelKind::weyl) ? 2 : 1;
    }

    const ComplexField& component_field(std::size_t j, int comp) const {
        switch (params_.model) {
            case ModelKind::pauli:
            case ModelKind::weyl:
                return history_.spinor(j).component(comp);
            case ModelKind::klein_gordon:
                return history_.kg(j).psi;
            default:
                return history_.scalar(j);
        }
    }

    /// Polar snapshots of one component, actions aligned in time so that
    /// finite differences of S across snapshots see no gauge jumps.
    const std::vector<PolarField>& polar(int comp = 0) const {
        auto& cache = polar_[comp];
        if (!cache) {
            auto fields = std::make_unique<std::vector<PolarField>>();
            fields->reserve(history_.size());
            for (std::size_t j = 0; j < history_.size(); ++j) {
                PolarField p = decompose(j, comp);
                if (j > 0) align_action_to(fields->back(), p, constants().hbar);
                fields->push_back(std::move(p));
            }
            cache = std::move(fields);
        }
        return *cache;
    }

    const VelocityHistory& velocity(int comp = 0) const {
        auto& cache = velocity_[comp];
        if (!cache)
            cache = std::make_unique<VelocityHistory>(
                build_velocity_history(history_, params_, comp));
        return *cache;
    }

    const FieldStack& stack_R(int comp = 0) const {
        return memo_stack(stack_R_[comp], comp, [&](const PolarField& p, std::size_t) {
            return std::pair{p.R, std::vector<std::uint8_t>{}};
        }, /*masked=*/false);
    }

    const FieldStack& stack_S(int comp = 0) const {
        return memo_stack(stack_S_[comp], comp, [&](const PolarField& p, std::size_t) {
            std::vector<std::uint8_t> def(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) def[i] = p.node_mask[i] ? 0 : 1;
            return std::pair{p.S, def};
        }, /*masked=*/true);
    }

    /// Per-snapshot total potential of the model (for the KG branch the
    /// second time derivative of R comes from 3-point differences on the
    /// stored snapshots, one-sided at the ends).
    const FieldStack& stack_W(int comp = 0) const {
        auto& cache = stack_W_[comp];
        if (!cache) {
            history_.require_at_least(models_needs_time_fd() ? 3 : 1, "total potential stack");
            auto st = std::make_unique<FieldStack>();
            st->grid = grid();
            st->times = history_.times;
            const auto& pf = polar(comp);
            for (std::size_t j = 0; j < history_.size(); ++j) {
                MaskedField w = total_potential_at(j, pf);
                st->values.push_back(std::move(w.values));
                st->defined.push_back(std::move(w.defined));
            }
            cache = std::move(st);
        }
        return *cache;
    }

    /// dS/dt per snapshot by centered differences on the aligned action
    /// (one-sided second-order at the ends), defined off the union of the
    /// participating node masks.
    const std::vector<MaskedField>& dS_dt_fields(int comp = 0) const {
        auto& cache = dS_dt_[comp];
        if (!cache) {
            history_.require_at_least(3, "dS/dt fields");
            const auto& pf = polar(comp);
            auto out = std::make_unique<std::vector<MaskedField>>();
            out->reserve(pf.size());
            const double dt = history_.dt;
            const std::size_t last = pf.size() - 1;
            for (std::size_t j = 0; j < pf.size(); ++j) {
                MaskedField f(pf[j].size());
                for (std::size_t i = 0; i < pf[j].size(); ++i) {
                    if (j == 0) {
                        if (pf[0].node_mask[i] || pf[1].node_mask[i] || pf[2].node_mask[i])
                            continue;
                        f.set(i, (-3.0 * pf[0].S[i] + 4.0 * pf[1].S[i] - pf[2].S[i]) /
                                     (2.0 * dt));
                    } else if (j == last) {
                        if (pf[last].node_mask[i] || pf[last - 1].node_mask[i] ||
                            pf[last - 2].node_mask[i])
                            continue;
                        f.set(i, (3.0 * pf[last].S[i] - 4.0 * pf[last - 1].S[i] +
                                  pf[last - 2].S[i]) /
                                     (2.0 * dt));
                    } else {
                        if (pf[j - 1].node_mask[i] || pf[j].node_mask[i] ||
                            pf[j + 1].node_mask[i])
                            continue;
                        f.set(i, (pf[j + 1].S[i] - pf[j - 1].S[i]) / (2.0 * dt));
                    }
                }
                out->push_back(std::move(f));
            }
            cache = std::move(out);
        }
        return *cache;
    }

    /// Integrate one curve with (v, R, S, W) samples attached.
    Trajectory trajectory(double x0, int comp = 0) const {
        AlongCurveStacks stacks;
        stacks.R = &stack_R(comp);
        stacks.S = &stack_S(comp);
        stacks.W = &stack_W(comp);
        stacks.hbar = constants().hbar;
        return integrate_trajectory(velocity(comp), x0, &stacks);
    }

    /// Integrate the ensemble, keyed by seed order.
    std::vector<Trajectory> trajectories(const std::vector<std::pair<double, int>>& seeds) const {
        std::vector<Trajectory> out;
        out.reserve(seeds.size());
        for (const auto& [x0, comp] : seeds) out.push_back(trajectory(x0, comp));
        return out;
    }

    /// Memoized per-snapshot derived field stack; `builder` is invoked once
    /// per snapshot index on first use of `key`.
    const FieldStack& derived_stack(const std::string& key, int comp,
                                    const std::function<MaskedField(std::size_t)>& builder) const {
        auto& slot = derived_[key + "#" + std::to_string(comp)];
        if (!slot) {
            auto st = std::make_unique<FieldStack>();
            st->grid = grid();
            st->times = history_.times;
            for (std::size_t j = 0; j < history_.size(); ++j) {
                MaskedField f = builder(j);
                st->values.push_back(std::move(f.values));
                st->defined.push_back(std::move(f.defined));
            }
            slot = std::move(st);
        }
        return *slot;
    }

    PolarField decompose(std::size_t j, int comp) const {
        const double hbar = constants().hbar;
        switch (params_.model) {
            case ModelKind::pauli:
            case ModelKind::weyl: {
                auto pr = polar_decompose_spinor(history_.spinor(j), params_.eps_node, hbar);
                return comp == 0 ? std::move(pr.first) : std::move(pr.second);
            }
            case ModelKind::klein_gordon:
                return polar_decompose(history_.kg(j).psi, params_.eps_node, hbar);
            default:
                return polar_decompose(history_.scalar(j), params_.eps_node, hbar);
        }
    }

private:
    bool models_needs_time_fd() const { return params_.model == ModelKind::klein_gordon; }

    MaskedField total_potential_at(std::size_t j, const std::vector<PolarField>& pf) const {
        const auto& k = constants();
        switch (params_.model) {
            case ModelKind::schrodinger:
                return total_potential(pf[j], params_.potential, k,
                                       TotalPotentialModel::schrodinger);
            case ModelKind::nonconstant_mass:
                return total_potential(pf[j], params_.potential, k,
                                       TotalPotentialModel::nonconstant_mass,
                                       &params_.mass_profile);
            case ModelKind::pauli: {
                // q*phi + per-component quantum potential
                PotentialSpec phi =
                    params_.external_field ? params_.external_field->phi : PotentialSpec::zero();
                auto w = quantum_potential(pf[j], k);
                const auto v = phi.values(grid(), k);
                for (std::size_t i = 0; i < w.size(); ++i)
                    if (w.defined[i]) w.values[i] += k.charge * v[i];
                return w;
            }
            case ModelKind::klein_gordon: {
                const std::size_t last = history_.size() - 1;
                const double dt = history_.dt;
                std::vector<double> d2R(grid().n, 0.0);
                const auto& Rm = pf[j > 0 ? j - 1 : 0].R;
                const auto& R0 = pf[j].R;
                const auto& Rp = pf[j < last ? j + 1 : last].R;
                for (std::size_t i = 0; i < grid().n; ++i) {
                    if (j == 0) {
                        d2R[i] = (pf[0].R[i] - 2.0 * pf[1].R[i] + pf[2].R[i]) / (dt * dt);
                    } else if (j == last) {
                        d2R[i] = (pf[last].R[i] - 2.0 * pf[last - 1].R[i] +
                                  pf[last - 2].R[i]) /
                                 (dt * dt);
                    } else {
                        d2R[i] = (Rp[i] - 2.0 * R0[i] + Rm[i]) / (dt * dt);
                    }
                }
                return total_potential(pf[j], PotentialSpec::zero(), k,
                                       TotalPotentialModel::klein_gordon, nullptr, &d2R);
            }
            case ModelKind::weyl: {
                // no potential enters the first-order model; along-curve W is
                // not used there
                MaskedField w(grid().n);
                for (std::size_t i = 0; i < grid().n; ++i) w.set(i, 0.0);
                return w;
            }
        }
        throw Error("total_potential_at: unreachable");
    }

    template <class Fn>
    const FieldStack& memo_stack(std::unique_ptr<FieldStack>& slot, int comp, Fn&& fn,
                                 bool masked) const {
        if (!slot) {
            auto st = std::make_unique<FieldStack>();
            st->grid = grid();
            st->times = history_.times;
            const auto& pf = polar(comp);
            for (std::size_t j = 0; j < pf.size(); ++j) {
                auto [vals, def] = fn(pf[j], j);
                st->values.push_back(std::move(vals));
                if (masked) st->defined.push_back(std::move(def));
            }
            slot = std::move(st);
        }
        return *slot;
    }

    SnapshotHistory history_;
    ModelParams params_;
    mutable std::map<int, std::unique_ptr<std::vector<PolarField>>> polar_;
    mutable std::map<int, std::unique_ptr<VelocityHistory>> velocity_;
    mutable std::map<int, std::unique_ptr<FieldStack>> stack_R_;
    mutable std::map<int, std::unique_ptr<FieldStack>> stack_S_;
    mutable std::map<int, std::unique_ptr<FieldStack>> stack_W_;
    mutable std::map<int, std::unique_ptr<std::vector<MaskedField>>> dS_dt_;
    mutable std::map<std::string, std::unique_ptr<FieldStack>> derived_;
};

} // namespace qtraj
