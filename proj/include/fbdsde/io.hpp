#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbdsde/errors.hpp"
#include "fbdsde/solver.hpp"

#ifndef FBDSDE_BUILD_ID
#define FBDSDE_BUILD_ID "unknown"
#endif

namespace fbdsde {

inline constexpr int kSummarySchemaVersion = 1;

inline std::string build_id() { return FBDSDE_BUILD_ID; }

/// Shortest text that reads back to the same double (17 significant digits).
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline nlohmann::json to_json(const SolverConfig& c) {
    nlohmann::json features = nlohmann::json::array();
    for (auto f : c.features) features.push_back(f == BackwardFeature::increment ? "increment" : "tail");
    return {{"picard_max_iters", c.picard_max_iters},
            {"picard_tol", c.picard_tol},
            {"picard_relaxation", c.picard_relaxation},
            {"anderson_depth", c.anderson_depth},
            {"basis", c.basis == BasisKind::polynomial ? "polynomial" : "full_sigma"},
            {"poly_degree", c.poly_degree},
            {"features", features},
            {"mc_paths", c.mc_paths},
            {"seed", c.seed},
            {"antithetic", c.antithetic}};
}

/// What every artifact records for reproduction.
struct Provenance {
    std::uint64_t seed = 1;
    double horizon = 1.0;
    int steps = 1;
    SolverConfig solver;

    nlohmann::json json() const {
        return {{"seed", seed}, {"grid", {{"T", horizon}, {"N", steps}}}, {"solver", to_json(solver)}, {"build_id", build_id()}};
    }
};

/// CSV with one provenance comment line, a header row and full-precision numbers.
/// Contains no timestamps, so equal inputs give byte-identical files.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const Provenance& prov, std::vector<std::string> header)
        : out_(path), width_(header.size()) {
        if (!out_) throw ConfigError("cannot open " + path.string() + " for writing");
        out_ << "# " << prov.json().dump() << '\n';
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    struct Cell {
        Cell(double x) : text(format_double(x)) {}
        Cell(int x) : text(std::to_string(x)) {}
        Cell(std::size_t x) : text(std::to_string(x)) {}
        Cell(std::string s) : text(std::move(s)) {}
        Cell(const char* s) : text(s) {}
        std::string text;
    };

    void row(std::initializer_list<Cell> cells) {
        if (cells.size() != width_) throw DomainError("CSV row width differs from the header");
        std::size_t i = 0;
        for (const auto& c : cells) out_ << (i++ ? "," : "") << c.text;
        out_ << '\n';
    }
    void row(const std::vector<Cell>& cells) {
        if (cells.size() != width_) throw DomainError("CSV row width differs from the header");
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i].text;
        out_ << '\n';
    }

private:
    std::ofstream out_;
    std::size_t width_;
};

struct Check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string note;
};

/// Versioned JSON summary; the timestamp lives only here.
struct Summary {
    std::string command;
    Provenance provenance;
    std::vector<Check> checks;
    std::vector<std::string> artifacts;
    nlohmann::json details = nlohmann::json::object();

    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }

    Check& add(std::string name, double value, double threshold, bool ok, std::string note = {}) {
        checks.push_back({std::move(name), value, threshold, ok, std::move(note)});
        return checks.back();
    }

    nlohmann::json json() const {
        nlohmann::json j = provenance.json();
        j["schema_version"] = kSummarySchemaVersion;
        j["command"] = command;
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char ts[32];
        std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        j["timestamp"] = ts;
        nlohmann::json cs = nlohmann::json::array();
        for (const auto& c : checks) {
            nlohmann::json e = {{"name", c.name}, {"pass", c.pass}};
            // JSON has no infinities; report them as strings
            auto num = [](double x) -> nlohmann::json { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(format_double(x)); };
            e["value"] = num(c.value);
            e["threshold"] = num(c.threshold);
            if (!c.note.empty()) e["note"] = c.note;
            cs.push_back(e);
        }
        j["checks"] = cs;
        j["artifacts"] = artifacts;
        j["details"] = details;
        j["pass"] = pass();
        return j;
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
        out << json().dump(2) << '\n';
    }
};

}  // namespace fbdsde
