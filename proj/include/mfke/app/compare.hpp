#pragma once

#include "mfke/measures.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace mfke::app {

struct SnapshotMetrics {
    double time = 0.0;
    double l1 = 0.0;
    double linf = 0.0;
    double w1 = 0.0;  // between the unit-mass normalisations
    double mass_error = 0.0;
};

struct ComparisonReport {
    std::vector<SnapshotMetrics> rows;
    nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

    nlohmann::ordered_json to_json() const;
    std::string to_text() const;
};

/// Metrics per matching snapshot time. Grids must coincide unless
/// `interpolate` is set, in which case the reference is interpolated onto the
/// run's grid. Throws ConfigError on mismatched times or grids.
ComparisonReport compare_snapshots(const std::vector<DensitySnapshot>& run, const std::vector<DensitySnapshot>& reference,
                                   bool interpolate = false);

/// Snapshots from a CSV file, or from every snapshot_*.csv (else *.csv) in a
/// directory, ordered by time.
std::vector<DensitySnapshot> load_artifacts(const std::filesystem::path& path);

/// compare_snapshots on two artifact locations; metadata records both paths
/// and any run_config.json / diagnostics.json next to the run.
ComparisonReport compare_artifacts(const std::filesystem::path& run, const std::filesystem::path& reference,
                                   bool interpolate = false);

}  // namespace mfke::app
