#pragma once

#include "mfke/app/compare.hpp"
#include "mfke/app/config.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mfke::app {

struct RunOptions {
    std::filesystem::path out_dir = "out";
    std::optional<std::size_t> environments;  // randomenv override
    std::ostream* log = nullptr;              // progress lines; null for silence
};

/// Executes `mode` (simulate, jump, reverse, randomenv, control, compare) and
/// writes its artifacts under options.out_dir. Throws ConfigError,
/// NumericalAbort or OracleInstability; see exit_code.
void run(const std::string& mode, const RunConfig& config, const RunOptions& options);

struct ControlRow {
    double time = 0.0;
    double l1_v = 0.0;
    double linf_v = 0.0;
    double identity_max = 0.0;  // max |alpha - D - 1/2 dv/dx| on the grid
};

struct ControlResult {
    std::vector<DensitySnapshot> v;             // particle value function, increasing t
    std::vector<DensitySnapshot> alpha;         // particle feedback control
    std::vector<DensitySnapshot> oracle_v;      // on the sim grid
    std::vector<DensitySnapshot> oracle_alpha;  // on the sim grid
    std::vector<ControlRow> rows;
    double drift_speed = 0.0;
};

/// Particle value function of the inventory problem and its feedback control,
/// checked against the grid HJB solver.
ControlResult control_pipeline(const RunConfig& config);

/// Reference snapshots for `kind` (burgers, heat, fd, hjb) on the config's sim
/// grid at its snapshot times.
std::vector<DensitySnapshot> oracle_reference(const std::string& kind, const RunConfig& config);

/// Acceptance-instance config used by `mfke oracle` when no config is given.
RunConfig default_oracle_config(const std::string& kind);

/// CLI exit status for an exception: 2 config, 3 numerical abort,
/// 4 oracle instability, 1 anything else.
int exit_code(const std::exception& e);

/// snapshot_000.csv style name.
std::string artifact_name(const std::string& stem, std::size_t index);

}  // namespace mfke::app
