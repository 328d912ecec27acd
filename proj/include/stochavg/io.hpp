// File formats: trajectory CSV (full double precision), report JSON/CSV,
// and the FNV-1a checksums recorded in run manifests.
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stochavg/metrics.hpp"
#include "stochavg/trajectory.hpp"

namespace stochavg::io {

/// 17 significant digits: enough to round-trip any double.
inline std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

/// Header `k,t,x_0,...,x_{n-1}` (or the provided column names), one row per
/// stored state.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                                 const std::vector<std::string>& columns = {}) {
    if (!columns.empty() && columns.size() != traj.dimension()) {
        throw std::invalid_argument("write_trajectory_csv: column-name count mismatch");
    }
    out << "k,t";
    for (std::size_t i = 0; i < traj.dimension(); ++i) {
        out << ',' << (columns.empty() ? "x_" + std::to_string(i) : columns[i]);
    }
    out << '\n';
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << k << ',' << format_double(traj.time_of(k));
        for (double v : traj.state(k)) out << ',' << format_double(v);
        out << '\n';
    }
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("read_csv: empty input");
    std::stringstream head(line);
    std::string cell;
    while (std::getline(head, cell, ',')) table.header.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row_stream(line);
        std::vector<double> row;
        while (std::getline(row_stream, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != table.header.size()) throw std::invalid_argument("read_csv: ragged row");
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x00000100000001B3ull;
    }
    return hash;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
    char buffer[20];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buffer;
}

inline nlohmann::json to_json(const DeviationReport& report) {
    nlohmann::json j;
    j["epsilon"] = report.epsilon;
    j["horizon_steps"] = report.horizon_steps;
    j["sup_deviation"] = report.sup_deviation;
    j["median_sup_deviation"] = report.median_sup_deviation;
    j["per_seed"] = report.per_seed;
    j["seeds"] = report.seeds;
    j["blowups"] = report.blowups;
    return j;
}

inline nlohmann::json to_json(const ExceedanceEstimate& estimate) {
    nlohmann::json j;
    j["estimate"] = estimate.estimate;
    j["std_error"] = estimate.std_error;
    j["exceedances"] = estimate.exceedances;
    j["replications"] = estimate.replications;
    j["blowups"] = estimate.blowups;
    return j;
}

/// Summary CSV of a rate study: one row per epsilon.
inline void write_rate_study_csv(std::ostream& out, const std::vector<DeviationReport>& rows) {
    out << "epsilon,horizon_steps,median_sup_deviation,max_sup_deviation,blowups\n";
    for (const auto& row : rows) {
        out << format_double(row.epsilon) << ',' << row.horizon_steps << ','
            << format_double(row.median_sup_deviation) << ',' << format_double(row.sup_deviation) << ','
            << row.blowups << '\n';
    }
}

}  // namespace stochavg::io
