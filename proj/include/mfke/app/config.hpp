#pragma once

#include "mfke/engine.hpp"
#include "mfke/oracle.hpp"
#include "mfke/problems.hpp"
#include "mfke/randomenv.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mfke::app {

/// Law given in a config: kind dirac (x0), gaussian (mean, sd), uniform (a, b)
/// or grid (path to an `x,u0` CSV, relative to the config file).
struct LawConfig {
    std::string kind = "gaussian";
    double x0 = 0.0;
    double mean = 0.0;
    double sd = 1.0;
    double a = 0.0;
    double b = 1.0;
    std::string path;
};

struct ProblemSection {
    std::string name;
    ParamMap params;
    std::optional<LawConfig> initial;
    std::optional<LawConfig> terminal;
};

struct EnvironmentSection {
    std::optional<NoiseMode> drift;
    std::vector<NoiseMode> modes;
    std::size_t environments = 1;
    std::uint64_t seed = 1;
};

/// Grid solver settings; horizon comes from sim.T.
struct OracleSection {
    double dt = 1e-3;
    UniformGrid grid{-8.0, 8.0, 1601};
};

struct CompareSection {
    /// cole_hopf, fd, or none. Config-mode compare runs the simulation and
    /// compares it against this reference.
    std::string reference = "none";
    bool interpolate = false;
};

struct RunConfig {
    std::string mode = "simulate";
    ProblemSection problem;
    SimConfig sim;
    EnvironmentSection environment;
    OracleSection oracle;
    CompareSection compare;
    std::filesystem::path base_dir;  // for relative paths; not echoed
};

/// Parses TOML (or JSON when the text starts with '{'). Unknown keys and bad
/// values throw ConfigError with the key path and, for TOML, the line.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Every field, defaults included. parse_config(echo(c).dump()) reproduces c.
nlohmann::ordered_json echo(const RunConfig& config);

/// Builtin problem with the config's laws and horizon. Throws ConfigError.
ProblemSpec build_problem(const RunConfig& config);

Sampler build_law(const LawConfig& law, const std::filesystem::path& base_dir);

}  // namespace mfke::app
