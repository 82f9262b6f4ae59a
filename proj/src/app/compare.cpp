#include "mfke/app/compare.hpp"

#include "mfke/csv.hpp"
#include "mfke/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mfke::app {

namespace {

bool same_grid(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i] - b[i]) > 1e-9 * std::max(1.0, std::abs(a[i]))) return false;
    }
    return true;
}

double grid_w1(const DensitySnapshot& a, const DensitySnapshot& b) {
    try {
        return wasserstein1(a, b);
    } catch (const std::domain_error&) {
        return std::numeric_limits<double>::quiet_NaN();  // zero-mass snapshot
    }
}

}  // namespace

nlohmann::ordered_json ComparisonReport::to_json() const {
    nlohmann::ordered_json j;
    j["metadata"] = metadata;
    j["snapshots"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json row;
        row["t"] = r.time;
        row["l1"] = r.l1;
        row["linf"] = r.linf;
        row["w1"] = std::isfinite(r.w1) ? nlohmann::ordered_json(r.w1) : nlohmann::ordered_json(nullptr);
        row["mass_error"] = r.mass_error;
        j["snapshots"].push_back(row);
    }
    return j;
}

std::string ComparisonReport::to_text() const {
    std::ostringstream out;
    out << std::setw(10) << "t" << std::setw(14) << "L1" << std::setw(14) << "Linf" << std::setw(14) << "W1"
        << std::setw(14) << "mass_err" << '\n';
    out << std::scientific << std::setprecision(4);
    for (const auto& r : rows) {
        out << std::setw(10) << std::defaultfloat << r.time << std::scientific << std::setw(14) << r.l1 << std::setw(14)
            << r.linf << std::setw(14) << r.w1 << std::setw(14) << r.mass_error << '\n';
    }
    return out.str();
}

ComparisonReport compare_snapshots(const std::vector<DensitySnapshot>& run, const std::vector<DensitySnapshot>& reference,
                                   bool interpolate) {
    if (run.size() != reference.size()) {
        throw ConfigError("compare: run has " + std::to_string(run.size()) + " snapshots, reference has " +
                          std::to_string(reference.size()));
    }
    ComparisonReport report;
    for (std::size_t k = 0; k < run.size(); ++k) {
        const auto& a = run[k];
        DensitySnapshot b = reference[k];
        a.validate();
        b.validate();
        if (std::abs(a.time - b.time) > 1e-9 * std::max(1.0, std::abs(a.time))) {
            throw ConfigError("compare: snapshot times differ (" + format_double(a.time) + " vs " + format_double(b.time) + ")");
        }
        if (!same_grid(a.grid, b.grid)) {
            if (!interpolate) throw ConfigError("compare: grids differ at t=" + format_double(a.time) + " (use --interpolate)");
            DensitySnapshot on;
            on.time = b.time;
            on.grid = a.grid;
            on.values.resize(a.grid.size());
            for (std::size_t i = 0; i < a.grid.size(); ++i) on.values[i] = b.interpolate(a.grid[i]);
            on.mass = b.mass;
            b = std::move(on);
        }
        std::vector<double> diff(a.grid.size());
        double linf = 0.0;
        for (std::size_t i = 0; i < diff.size(); ++i) {
            diff[i] = std::abs(a.values[i] - b.values[i]);
            linf = std::max(linf, diff[i]);
        }
        SnapshotMetrics m;
        m.time = a.time;
        m.l1 = trapezoid(a.grid, diff);
        m.linf = linf;
        m.w1 = grid_w1(a, b);
        m.mass_error = std::abs(a.mass - b.mass);
        report.rows.push_back(m);
    }
    return report;
}

std::vector<DensitySnapshot> load_artifacts(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) throw ConfigError("compare: " + path.string() + " does not exist");
    if (!fs::is_directory(path)) return read_snapshots_csv(path);
    std::vector<fs::path> files, any;
    for (const auto& e : fs::directory_iterator(path)) {
        if (e.path().extension() != ".csv") continue;
        any.push_back(e.path());
        if (e.path().filename().string().rfind("snapshot_", 0) == 0) files.push_back(e.path());
    }
    if (files.empty()) files = any;
    if (files.empty()) throw ConfigError("compare: no CSV snapshots in " + path.string());
    std::sort(files.begin(), files.end());
    std::vector<DensitySnapshot> out;
    for (const auto& f : files) {
        auto snaps = read_snapshots_csv(f);
        out.insert(out.end(), snaps.begin(), snaps.end());
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
    return out;
}

ComparisonReport compare_artifacts(const std::filesystem::path& run, const std::filesystem::path& reference,
                                   bool interpolate) {
    auto report = compare_snapshots(load_artifacts(run), load_artifacts(reference), interpolate);
    report.metadata["run"] = run.string();
    report.metadata["reference"] = reference.string();
    report.metadata["interpolate"] = interpolate;
    if (std::filesystem::is_directory(run)) {
        for (const char* name : {"run_config.json", "diagnostics.json"}) {
            std::ifstream in(run / name);
            if (!in) continue;
            try {
                report.metadata[std::string(name).substr(0, std::string(name).size() - 5)] = nlohmann::ordered_json::parse(in);
            } catch (const nlohmann::json::exception&) {
            }
        }
    }
    return report;
}

}  // namespace mfke::app
