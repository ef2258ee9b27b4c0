#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qtraj/errors.hpp"
#include "qtraj/scenario.hpp"
#include "qtraj/trajectory.hpp"

namespace qtraj {

/// Shortest decimal that round-trips a 64-bit float (17 significant digits).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

} // namespace detail

/// snapshots.csv: one row per (t, x); the value columns depend on the model:
///   scalar models:   t,x,re_psi,im_psi
///   spinor models:   t,x,re_psi,im_psi,re_psi2,im_psi2
///   second order:    t,x,re_psi,im_psi,re_dpsi_dt,im_dpsi_dt
inline void write_snapshots(const SnapshotHistory& h, const std::filesystem::path& path) {
    auto out = detail::open_for_write(path);
    const bool spinor = h.model == ModelKind::pauli || h.model == ModelKind::weyl;
    const bool second_order = h.model == ModelKind::klein_gordon;
    out << "t,x,re_psi,im_psi";
    if (spinor) out << ",re_psi2,im_psi2";
    if (second_order) out << ",re_dpsi_dt,im_dpsi_dt";
    out << "\n";
    for (std::size_t j = 0; j < h.size(); ++j) {
        const std::string t = format_double(h.times[j]);
        for (std::size_t i = 0; i < h.grid.n; ++i) {
            out << t << ',' << format_double(h.grid.x(i));
            auto emit = [&](const Complex& v) {
                out << ',' << format_double(v.real()) << ',' << format_double(v.imag());
            };
            if (spinor) {
                emit(h.spinor(j).up.values[i]);
                emit(h.spinor(j).down.values[i]);
            } else if (second_order) {
                emit(h.kg(j).psi.values[i]);
                emit(h.kg(j).dpsi_dt.values[i]);
            } else {
                emit(h.scalar(j).values[i]);
            }
            out << "\n";
        }
    }
}

/// trajectories.csv: traj_id,component,t,x,v,R,S,status (one row per recorded
/// point; header only for an empty ensemble).
inline void write_trajectories(const std::vector<Trajectory>& ensemble,
                               const std::filesystem::path& path) {
    auto out = detail::open_for_write(path);
    out << "traj_id,component,t,x,v,R,S,status\n";
    for (std::size_t id = 0; id < ensemble.size(); ++id) {
        const auto& tr = ensemble[id];
        for (std::size_t j = 0; j < tr.size(); ++j) {
            out << id << ',' << tr.component << ',' << format_double(tr.times[j]) << ','
                << format_double(tr.positions[j]) << ',' << format_double(tr.samples[j].v)
                << ',' << format_double(tr.samples[j].R) << ','
                << format_double(tr.samples[j].S) << ',' << to_string(tr.status) << "\n";
        }
    }
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw IoError("csv: no column named " + name);
    }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    if (first) throw IoError("csv: empty file " + path.string());
    return table;
}

/// Rebuild a snapshot history from snapshots.csv plus the scenario echo
/// (model, grid) from the manifest.
inline SnapshotHistory read_snapshots(const std::filesystem::path& path, ModelKind model,
                                      const UniformGrid& grid) {
    const auto table = read_csv(path);
    SnapshotHistory h;
    h.model = model;
    h.grid = grid;
    const std::size_t n = grid.n;
    if (table.rows.size() % n != 0)
        throw IoError("snapshots.csv: row count is not a multiple of n_points");
    const std::size_t n_snapshots = table.rows.size() / n;
    const bool spinor = model == ModelKind::pauli || model == ModelKind::weyl;
    const bool second_order = model == ModelKind::klein_gordon;

    for (std::size_t j = 0; j < n_snapshots; ++j) {
        const double t = std::stod(table.rows[j * n][0]);
        ComplexField a(grid, t), b(grid, t);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& row = table.rows[j * n + i];
            a.values[i] = Complex{std::stod(row[2]), std::stod(row[3])};
            if (spinor || second_order)
                b.values[i] = Complex{std::stod(row[4]), std::stod(row[5])};
        }
        h.times.push_back(t);
        if (spinor) h.states.emplace_back(SpinorField(std::move(a), std::move(b)));
        else if (second_order) h.states.emplace_back(KGState(std::move(a), std::move(b)));
        else h.states.emplace_back(std::move(a));
    }
    if (h.times.size() >= 2) h.dt = h.times[1] - h.times[0];
    return h;
}

inline void write_manifest(const Scenario& s, std::size_t n_snapshots,
                           std::size_t n_trajectories, const std::filesystem::path& path) {
    Json j;
    j["tool"] = "qtraj";
    j["version"] = "0.1.0";
    j["scenario"] = scenario_to_json(s);
    j["n_snapshots"] = n_snapshots;
    j["n_trajectories"] = n_trajectories;
    auto out = detail::open_for_write(path);
    out << j.dump(2) << "\n";
}

inline Scenario read_manifest_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("manifest: " + std::string(e.what()));
    }
    return parse_scenario(j.at("scenario").dump());
}

} // namespace qtraj
