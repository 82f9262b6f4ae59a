#pragma once

#include "mfke/measures.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mfke {

/// Shortest decimal string that parses back to exactly `x`.
std::string format_double(double x);

/// Snapshot CSV: header `t,x,u,mass`, one row per grid point. Several
/// snapshots may share one file; rows are grouped by t.
void write_snapshots_csv(std::ostream& out, const std::vector<DensitySnapshot>& snapshots);
void write_snapshots_csv(const std::filesystem::path& path, const std::vector<DensitySnapshot>& snapshots);

/// Parses a snapshot CSV. Throws std::runtime_error naming the offending line.
std::vector<DensitySnapshot> read_snapshots_csv(std::istream& in);
std::vector<DensitySnapshot> read_snapshots_csv(const std::filesystem::path& path);

/// Two-column `x,u0` table for grid initial laws.
struct GridTable {
    std::vector<double> x;
    std::vector<double> values;
};
GridTable read_grid_table_csv(const std::filesystem::path& path);

}  // namespace mfke
