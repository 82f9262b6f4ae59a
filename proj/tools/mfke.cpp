// mfke: command-line front end for the particle solvers and oracles.

#include "mfke/app/compare.hpp"
#include "mfke/app/config.hpp"
#include "mfke/app/runner.hpp"
#include "mfke/csv.hpp"
#include "mfke/errors.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace mfke;

namespace {

int oracle_command(const std::string& kind, const std::string& config_path, const std::string& out) {
    app::RunConfig cfg = config_path.empty() ? app::default_oracle_config(kind) : app::load_config(config_path);
    const auto snaps = app::oracle_reference(kind, cfg);
    const fs::path p(out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_snapshots_csv(p, snaps);
    std::cout << "oracle " << kind << ": " << snaps.size() << " snapshot(s) -> " << out << '\n';
    return 0;
}

int compare_command(const std::vector<std::string>& paths, const std::string& config_path, const std::string& out,
                    bool interpolate) {
    if (!config_path.empty()) {
        if (!paths.empty()) throw ConfigError("compare: give either --config or RUN REFERENCE, not both");
        auto cfg = app::load_config(config_path);
        if (interpolate) cfg.compare.interpolate = true;
        app::RunOptions opts;
        opts.out_dir = out.empty() ? "compare_out" : out;
        opts.log = &std::cout;
        app::run("compare", cfg, opts);
        return 0;
    }
    if (paths.size() != 2) throw ConfigError("compare: need RUN and REFERENCE paths (or --config)");
    const auto report = app::compare_artifacts(paths[0], paths[1], interpolate);
    std::cout << report.to_text();
    if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream(fs::path(out) / "report.json", std::ios::binary) << report.to_json().dump(2) << '\n';
        std::ofstream(fs::path(out) / "report.txt", std::ios::binary) << report.to_text();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Particle solvers for McKean and McKean Feynman-Kac equations"};
    cli.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::optional<std::size_t> environments;
    const std::pair<const char*, const char*> modes[] = {
        {"simulate", "weighted particle run"},
        {"jump", "killing-and-relocation particle run"},
        {"reverse", "terminal-value problem by time reversal"},
        {"randomenv", "quenched runs over sampled environments"},
        {"control", "particle value function and feedback control vs grid HJB"},
    };
    for (const auto& [name, help] : modes) {
        auto* sub = cli.add_subcommand(name, help);
        sub->add_option("--config", config_path, "TOML or JSON run configuration")->required();
        sub->add_option("--out", out_dir, "output directory");
        if (std::string(name) == "randomenv") sub->add_option("--environments", environments, "number of environments");
    }

    std::string oracle_kind, oracle_out = "ref.csv", oracle_config;
    auto* oracle = cli.add_subcommand("oracle", "reference solution on the sim grid");
    oracle->add_option("--problem", oracle_kind, "burgers, heat, fd or hjb")->required();
    oracle->add_option("--config", oracle_config, "problem and grid (defaults to the acceptance instance)");
    oracle->add_option("--out", oracle_out, "output CSV");

    std::vector<std::string> compare_paths;
    std::string compare_config, compare_out;
    bool interpolate = false;
    auto* compare = cli.add_subcommand("compare", "metrics between a run and a reference");
    compare->add_option("paths", compare_paths, "RUN REFERENCE (CSV files or run directories)");
    compare->add_option("--config", compare_config, "run a simulation and compare it with compare.reference");
    compare->add_option("--out", compare_out, "report directory");
    compare->add_flag("--interpolate", interpolate, "interpolate the reference onto the run grid");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (oracle->parsed()) return oracle_command(oracle_kind, oracle_config, oracle_out);
        if (compare->parsed()) return compare_command(compare_paths, compare_config, compare_out, interpolate);
        const std::string mode = cli.get_subcommands().front()->get_name();
        const auto cfg = app::load_config(config_path);
        app::RunOptions opts;
        opts.out_dir = out_dir;
        opts.environments = environments;
        opts.log = &std::cout;
        app::run(mode, cfg, opts);
        return 0;
    } catch (const std::exception& e) {
        const int code = app::exit_code(e);
        std::cerr << "mfke: " << e.what() << '\n';
        if (auto* a = dynamic_cast<const NumericalAbort*>(&e)) {
            std::cerr << "mfke: aborted at particle " << a->particle() << ", step " << a->step() << '\n';
        }
        if (auto* o = dynamic_cast<const OracleInstability*>(&e)) {
            std::cerr << "mfke: suggested dt " << o->suggested_dt() << '\n';
        }
        return code;
    }
}
