#include "mfke/app/compare.hpp"
#include "mfke/app/config.hpp"
#include "mfke/app/runner.hpp"
#include "mfke/errors.hpp"
#include "mfke/parallel.hpp"

#include <doctest.h>

#include <cstdlib>
#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace mfke;
using namespace mfke::app;
namespace fs = std::filesystem;

namespace {

const char* kLinear = R"(mode = "simulate"

[problem]
name = "linear_fp"
[problem.params]
sigma = 1.0
lambda = -0.5
[problem.initial]
kind = "dirac"
x0 = 0.0

[sim]
N = 2000
dt = 0.01
T = 0.5
seed = 3
snapshot_times = [0.25, 0.5]
[sim.grid]
min = -4.0
max = 4.0
points = 81
)";

const char* kBurgers = R"(
[problem]
name = "burgers_flux"
[problem.params]
nu = 1.0

[sim]
N = 5000
dt = 0.01
T = 0.2
seed = 2
[sim.grid]
min = -4.0
max = 4.0
points = 161

[oracle]
dt = 1e-3

[compare]
reference = "cole_hopf"
)";

const char* kControl = R"(
[problem]
name = "inventory_kpz"
[problem.params]
sigma = 1.0
D = 0.1

[sim]
N = 3000
dt = 0.01
T = 0.2
snapshot_times = [0.0, 0.1]
[sim.grid]
min = -4.0
max = 4.0
points = 81

[oracle]
dt = 1e-3
[oracle.grid]
min = -8.0
max = 8.0
points = 321
)";

const char* kRandomEnv = R"(
[problem]
name = "linear_fp"

[sim]
N = 500
dt = 0.05
T = 0.5

[environment]
environments = 4
seed = 9
[[environment.modes]]
kind = "cosine"
)";

const char* kReverse = R"(
[problem]
name = "terminal_fp"
[problem.params]
a = 1.0

[sim]
N = 1000
dt = 0.01
T = 0.2
snapshot_times = [0.0, 0.2]
)";

const char* kJump = R"(
[problem]
name = "linear_fp"
[problem.params]
lambda_quadratic = 1.0
lambda_cap = 10.0

[sim]
N = 1000
dt = 0.01
T = 0.2
)";

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("mfke_unit_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Every file except timing.json, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().filename() == "timing.json") continue;
        out[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
    return out;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

int shell(const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("echo round trip") {
    const auto a = parse_config(kLinear);
    const auto e = echo(a);
    const auto b = parse_config(e.dump(2));
    CHECK(echo(b) == e);
    CHECK(a.sim.particles == 2000);
    CHECK(a.sim.snapshot_times == std::vector<double>{0.25, 0.5});
    CHECK(a.problem.params.at("lambda") == -0.5);
    CHECK(e["sim"]["bandwidth"]["policy"] == "silverman");
}

TEST_CASE("json configs") {
    const auto c = parse_config(R"({"mode": "jump", "problem": {"name": "linear_fp"}, "sim": {"N": 10, "dt": 0.1}})");
    CHECK(c.mode == "jump");
    CHECK(c.sim.particles == 10);
}

TEST_CASE("config errors name the key and line") {
    CHECK_THROWS_WITH_AS(parse_config("[problem]\nname = \"linear_fp\"\nfoo = 1\n"), doctest::Contains("problem.foo (line 3)"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("[problem]\nname = \"linear_fp\"\n[sim]\ndt = 0\n"), doctest::Contains("sim.dt (line 4)"),
                         ConfigError);
    CHECK_THROWS_AS(parse_config("[problem\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("mode = \"fly\"\n[problem]\nname = \"linear_fp\"\n"), ConfigError);
    const auto bad_param = parse_config("[problem]\nname = \"burgers_flux\"\n[problem.params]\nmu = 1\n");
    CHECK_THROWS_AS(build_problem(bad_param), ConfigError);
    CHECK(exit_code(ConfigError("x")) == 2);
    CHECK(exit_code(std::invalid_argument("x")) == 2);
    CHECK(exit_code(NumericalAbort("x", 0, 0)) == 3);
    CHECK(exit_code(OracleInstability("x", 0.1)) == 4);
    CHECK(exit_code(std::runtime_error("x")) == 1);
}

TEST_CASE("simulate artifacts") {
    TempDir d;
    run("simulate", parse_config(kLinear), RunOptions{d.path});
    for (const char* f : {"snapshot_000.csv", "snapshot_001.csv", "diagnostics.json", "run_config.json", "timing.json"}) {
        CHECK_MESSAGE(fs::exists(d.path / f), f);
    }
    const auto diag = nlohmann::json::parse(slurp(d.path / "diagnostics.json"));
    CHECK(diag["mass_curve"].size() == 51);
    const auto snaps = load_artifacts(d.path);
    REQUIRE(snaps.size() == 2);
    CHECK(snaps[1].mass == doctest::Approx(std::exp(-0.25)).epsilon(1e-12));
}

TEST_CASE("compare reports") {
    TempDir d;
    run("simulate", parse_config(kLinear), RunOptions{d.path / "a"});
    const auto self = compare_artifacts(d.path / "a", d.path / "a");
    REQUIRE(self.rows.size() == 2);
    for (const auto& r : self.rows) {
        CHECK(r.l1 == 0.0);
        CHECK(r.linf == 0.0);
        CHECK(r.mass_error == 0.0);
    }
    CHECK(self.metadata.contains("run_config"));

    auto snaps = load_artifacts(d.path / "a");
    for (auto& s : snaps) {
        for (double& x : s.grid) x += 0.05;
    }
    CHECK_THROWS_AS(compare_snapshots(load_artifacts(d.path / "a"), snaps), ConfigError);
    const auto shifted = compare_snapshots(load_artifacts(d.path / "a"), snaps, true);
    CHECK(shifted.rows[0].l1 > 0.0);
    snaps.pop_back();
    CHECK_THROWS_AS(compare_snapshots(load_artifacts(d.path / "a"), snaps), ConfigError);

    run("compare", parse_config(kBurgers), RunOptions{d.path / "b"});
    const auto report = nlohmann::json::parse(slurp(d.path / "b" / "report.json"));
    const double l1 = report["snapshots"][0]["l1"];
    CHECK(l1 > 0.0);
    CHECK(l1 < 0.2);
    CHECK(fs::exists(d.path / "b" / "report.txt"));
}

TEST_CASE("control identity") {
    const auto res = control_pipeline(parse_config(kControl));
    REQUIRE(res.rows.size() == 2);
    for (const auto& r : res.rows) CHECK(r.identity_max <= 1e-12);
    CHECK(res.v[0].time == 0.0);
    CHECK(res.drift_speed == 0.1);
}

TEST_CASE("reruns are byte identical across worker counts") {
    const std::pair<const char*, const char*> cases[] = {{"simulate", kLinear}, {"jump", kJump},
                                                         {"reverse", kReverse}, {"randomenv", kRandomEnv},
                                                         {"control", kControl}, {"compare", kBurgers}};
    for (const auto& [mode, text] : cases) {
        TempDir d;
        const auto cfg = parse_config(text);
        set_worker_count(1);
        run(mode, cfg, RunOptions{d.path / "one"});
        set_worker_count(3);
        run(mode, cfg, RunOptions{d.path / "three"});
        set_worker_count(0);
        const auto a = tree(d.path / "one"), b = tree(d.path / "three");
        CHECK_MESSAGE(!a.empty(), mode);
        CHECK_MESSAGE(a == b, mode);
    }
}

TEST_CASE("binary exit codes") {
    const char* bin = std::getenv("MFKE_BIN");
    if (!bin) {
        MESSAGE("MFKE_BIN not set; binary checks skipped");
        return;
    }
    TempDir d;
    write(d.path / "ok.toml", kLinear);
    write(d.path / "bad.toml", "[problem]\nname = \"linear_fp\"\n[sim]\ndt = 0\n");
    write(d.path / "abort.toml",
          "[problem]\nname = \"linear_fp\"\n[problem.params]\nsigma = 0.0\ndrift = 1e308\n[sim]\nN = 4\ndt = 1.0\nT = 10.0\n");
    write(d.path / "oracle.toml",
          "[problem]\nname = \"linear_fp\"\n[problem.params]\ndrift = 100.0\n[problem.initial]\nkind = \"gaussian\"\n[sim]\nN = 4\ndt = 0.1\nT = 1.0\n[oracle]\ndt = 0.1\n");
    const std::string b = bin;
    const std::string out = (d.path / "out").string();
    CHECK(shell(b + " simulate --config " + (d.path / "ok.toml").string() + " --out " + out) == 0);
    CHECK(fs::exists(d.path / "out" / "snapshot_001.csv"));
    CHECK(shell(b + " simulate --config " + (d.path / "bad.toml").string() + " --out " + out) == 2);
    CHECK(shell(b + " simulate --config " + (d.path / "missing.toml").string() + " --out " + out) == 2);
    CHECK(shell(b + " simulate --bogus") == 2);
    CHECK(shell(b + " simulate --config " + (d.path / "abort.toml").string() + " --out " + out) == 3);
    CHECK(shell(b + " oracle --problem fd --config " + (d.path / "oracle.toml").string() + " --out " + out + "/r.csv") == 4);
    CHECK(shell(b + " compare " + out + " " + out) == 0);
    const std::string env1 = "MFKE_THREADS=1 " + b + " simulate --config " + (d.path / "ok.toml").string() + " --out ";
    const std::string env4 = "MFKE_THREADS=4 " + b + " simulate --config " + (d.path / "ok.toml").string() + " --out ";
    CHECK(shell(env1 + (d.path / "t1").string()) == 0);
    CHECK(shell(env4 + (d.path / "t4").string()) == 0);
    CHECK(tree(d.path / "t1") == tree(d.path / "t4"));
}

}
