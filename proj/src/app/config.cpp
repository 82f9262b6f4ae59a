#include "mfke/app/config.hpp"

#include "mfke/csv.hpp"
#include "mfke/errors.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace mfke::app {

namespace {

using json = nlohmann::json;
using LineMap = std::map<std::string, std::size_t>;

// TOML -> JSON, remembering the source line of every key path.
json from_toml(const toml::node& node, const std::string& path, LineMap& lines) {
    if (node.source().begin.line) lines[path] = node.source().begin.line;
    if (auto* t = node.as_table()) {
        json out = json::object();
        for (const auto& [k, v] : *t) {
            const std::string key(k.str());
            const std::string sub = path.empty() ? key : path + "." + key;
            if (k.source().begin.line) lines[sub] = k.source().begin.line;
            out[key] = from_toml(v, sub, lines);
        }
        return out;
    }
    if (auto* a = node.as_array()) {
        json out = json::array();
        std::size_t i = 0;
        for (const auto& v : *a) out.push_back(from_toml(v, path + "[" + std::to_string(i++) + "]", lines));
        return out;
    }
    if (auto* v = node.as_integer()) return v->get();
    if (auto* v = node.as_floating_point()) return v->get();
    if (auto* v = node.as_boolean()) return v->get();
    if (auto* v = node.as_string()) return v->get();
    throw ConfigError(path + ": unsupported TOML value type");
}

class Reader {
public:
    Reader(const json& j, std::string path, const LineMap& lines) : j_(j), path_(std::move(path)), lines_(lines) {
        if (!j_.is_object()) fail("expected a table");
    }

    [[noreturn]] void fail(const std::string& msg, const std::string& key = {}) const {
        throw ConfigError(where(key) + ": " + msg);
    }

    std::string where(const std::string& key) const {
        const std::string p = key.empty() ? path_ : (path_.empty() ? key : path_ + "." + key);
        auto it = lines_.find(p);
        if (it != lines_.end()) return p + " (line " + std::to_string(it->second) + ")";
        return p.empty() ? std::string("config") : p;
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) fail("expected a number", key);
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail("must be finite", key);
        return d;
    }

    std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer()) {
            if (v.get<std::int64_t>() < 0) fail("must be nonnegative", key);
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        }
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
        }
        fail("expected a nonnegative integer", key);
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) fail("expected true or false", key);
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_string()) fail("expected a string", key);
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        std::vector<double> out;
        if (!has(key)) return out;
        const auto& v = j_.at(key);
        if (!v.is_array()) fail("expected an array of numbers", key);
        for (const auto& e : v) {
            if (!e.is_number()) fail("expected an array of numbers", key);
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::optional<Reader> table(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return Reader(j_.at(key), sub(key), lines_);
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    const LineMap& lines() const { return lines_; }

    // Rejects keys that were never asked for.
    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) fail("unknown key '" + k + "'", k);
        }
    }

private:
    const json& j_;
    std::string path_;
    const LineMap& lines_;
    std::set<std::string> seen_;
};

LawConfig read_law(Reader r) {
    LawConfig law;
    law.kind = r.string("kind", "gaussian");
    if (law.kind == "dirac") {
        law.x0 = r.number("x0", 0.0);
    } else if (law.kind == "gaussian") {
        law.mean = r.number("mean", 0.0);
        law.sd = r.number("sd", 1.0);
        if (!(law.sd > 0.0)) r.fail("must be positive", "sd");
    } else if (law.kind == "uniform") {
        law.a = r.number("a", 0.0);
        law.b = r.number("b", 1.0);
        if (!(law.b > law.a)) r.fail("must exceed a", "b");
    } else if (law.kind == "grid") {
        law.path = r.string("path", "");
        if (law.path.empty()) r.fail("grid law needs a path", "path");
    } else {
        r.fail("unknown law kind '" + law.kind + "' (dirac, gaussian, uniform, grid)", "kind");
    }
    r.finish();
    return law;
}

UniformGrid read_grid(Reader r, UniformGrid g) {
    g.min = r.number("min", g.min);
    g.max = r.number("max", g.max);
    g.points = static_cast<std::size_t>(r.integer("points", g.points));
    if (g.points < 2) r.fail("need at least 2", "points");
    if (!(g.max > g.min)) r.fail("must exceed min", "max");
    r.finish();
    return g;
}

NoiseMode read_mode(Reader r) {
    NoiseMode m;
    const std::string kind = r.string("kind", "constant");
    if (kind == "constant") {
        m.kind = ModeKind::constant;
    } else if (kind == "cosine") {
        m.kind = ModeKind::cosine;
    } else if (kind == "gaussian_bump") {
        m.kind = ModeKind::gaussian_bump;
    } else {
        r.fail("unknown mode kind '" + kind + "' (constant, cosine, gaussian_bump)", "kind");
    }
    m.amplitude = r.number("amplitude", m.amplitude);
    m.frequency = r.number("frequency", m.frequency);
    m.phase = r.number("phase", m.phase);
    m.center = r.number("center", m.center);
    m.width = r.number("width", m.width);
    if (!(m.width > 0.0)) r.fail("must be positive", "width");
    r.finish();
    return m;
}

const char* kernel_name(KernelFamily k) { return k == KernelFamily::gaussian ? "gaussian" : "epanechnikov"; }

const char* kde_name(KdeMethod k) {
    switch (k) {
        case KdeMethod::automatic: return "automatic";
        case KdeMethod::direct: return "direct";
        case KdeMethod::binned: return "binned";
    }
    return "automatic";
}

const char* mode_kind_name(ModeKind k) {
    switch (k) {
        case ModeKind::constant: return "constant";
        case ModeKind::cosine: return "cosine";
        case ModeKind::gaussian_bump: return "gaussian_bump";
    }
    return "constant";
}

SimConfig read_sim(Reader r) {
    SimConfig s;
    s.particles = static_cast<std::size_t>(r.integer("N", s.particles));
    s.dt = r.number("dt", s.dt);
    s.horizon = r.number("T", s.horizon);
    s.seed = r.integer("seed", s.seed);
    const std::string kernel = r.string("kernel", "gaussian");
    if (kernel == "gaussian") {
        s.kernel = KernelFamily::gaussian;
    } else if (kernel == "epanechnikov") {
        s.kernel = KernelFamily::epanechnikov;
    } else {
        r.fail("unknown kernel '" + kernel + "' (gaussian, epanechnikov)", "kernel");
    }
    s.snapshot_times = r.numbers("snapshot_times");
    s.snapshot_gradients = r.boolean("snapshot_gradients", false);
    if (auto b = r.table("bandwidth")) {
        const std::string policy = b->string("policy", "silverman");
        if (policy == "silverman") {
            s.bandwidth.policy = BandwidthPolicy::silverman;
        } else if (policy == "fixed") {
            s.bandwidth.policy = BandwidthPolicy::fixed;
        } else {
            b->fail("unknown policy '" + policy + "' (silverman, fixed)", "policy");
        }
        s.bandwidth.value = b->number("value", s.bandwidth.value);
        s.bandwidth.factor = b->number("factor", s.bandwidth.factor);
        s.bandwidth.floor = b->number("floor", s.bandwidth.floor);
        b->finish();
    }
    if (auto g = r.table("grid")) s.grid = read_grid(*g, s.grid);
    if (auto k = r.table("kde")) {
        const std::string method = k->string("method", "automatic");
        if (method == "automatic") {
            s.kde.method = KdeMethod::automatic;
        } else if (method == "direct") {
            s.kde.method = KdeMethod::direct;
        } else if (method == "binned") {
            s.kde.method = KdeMethod::binned;
        } else {
            k->fail("unknown method '" + method + "' (automatic, direct, binned)", "method");
        }
        s.kde.binned_threshold = static_cast<std::size_t>(k->integer("threshold", s.kde.binned_threshold));
        s.kde.bins_per_bandwidth = static_cast<std::size_t>(k->integer("bins_per_bandwidth", s.kde.bins_per_bandwidth));
        s.kde.max_bins = static_cast<std::size_t>(k->integer("max_bins", s.kde.max_bins));
        if (s.kde.bins_per_bandwidth == 0) k->fail("must be positive", "bins_per_bandwidth");
        if (s.kde.max_bins < 16) k->fail("must be at least 16", "max_bins");
        k->finish();
    }
    r.finish();
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        // Messages start with the key path, e.g. "sim.dt: ...".
        std::string msg = e.what();
        const auto colon = msg.find(':');
        const std::string key = colon == std::string::npos ? std::string() : msg.substr(0, colon);
        auto it = r.lines().find(key);
        if (it != r.lines().end()) msg = key + " (line " + std::to_string(it->second) + ")" + msg.substr(colon);
        throw ConfigError(msg);
    }
    return s;
}

RunConfig from_json(const json& root, const LineMap& lines, const std::filesystem::path& base_dir) {
    Reader r(root, "", lines);
    RunConfig c;
    c.base_dir = base_dir;
    c.mode = r.string("mode", c.mode);
    static const std::set<std::string> modes{"simulate", "jump", "reverse", "randomenv", "control", "oracle", "compare"};
    if (!modes.count(c.mode)) r.fail("unknown mode '" + c.mode + "'", "mode");

    auto p = r.table("problem");
    if (!p) r.fail("missing [problem] section");
    c.problem.name = p->string("name", "");
    if (c.problem.name.empty()) p->fail("missing problem name", "name");
    if (auto params = p->table("params")) {
        const json& raw = p->raw("params");
        for (const auto& [k, v] : raw.items()) c.problem.params[k] = params->number(k, 0.0);
        params->finish();
    }
    if (auto law = p->table("initial")) c.problem.initial = read_law(*law);
    if (auto law = p->table("terminal")) c.problem.terminal = read_law(*law);
    if (c.problem.initial && c.problem.terminal) p->fail("give either an initial or a terminal law, not both");
    p->finish();

    if (auto s = r.table("sim")) c.sim = read_sim(*s);
    else c.sim.validate();

    if (auto e = r.table("environment")) {
        c.environment.environments = static_cast<std::size_t>(e->integer("environments", 1));
        if (c.environment.environments == 0) e->fail("need at least one environment", "environments");
        c.environment.seed = e->integer("seed", 1);
        if (auto d = e->table("drift")) c.environment.drift = read_mode(*d);
        if (e->has("modes")) {
            const json& arr = e->raw("modes");
            if (!arr.is_array()) e->fail("expected an array of tables", "modes");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                c.environment.modes.push_back(read_mode(Reader(arr[i], e->sub("modes") + "[" + std::to_string(i) + "]", lines)));
            }
        }
        e->finish();
    }
    if (auto o = r.table("oracle")) {
        c.oracle.dt = o->number("dt", c.oracle.dt);
        if (!(c.oracle.dt > 0.0)) o->fail("must be positive", "dt");
        if (auto g = o->table("grid")) c.oracle.grid = read_grid(*g, c.oracle.grid);
        o->finish();
    }
    if (auto cmp = r.table("compare")) {
        c.compare.reference = cmp->string("reference", c.compare.reference);
        if (c.compare.reference != "none" && c.compare.reference != "cole_hopf" && c.compare.reference != "fd") {
            cmp->fail("unknown reference '" + c.compare.reference + "' (none, cole_hopf, fd)", "reference");
        }
        c.compare.interpolate = cmp->boolean("interpolate", false);
        cmp->finish();
    }
    r.finish();
    return c;
}

nlohmann::ordered_json law_json(const LawConfig& l) {
    nlohmann::ordered_json j;
    j["kind"] = l.kind;
    if (l.kind == "dirac") j["x0"] = l.x0;
    if (l.kind == "gaussian") {
        j["mean"] = l.mean;
        j["sd"] = l.sd;
    }
    if (l.kind == "uniform") {
        j["a"] = l.a;
        j["b"] = l.b;
    }
    if (l.kind == "grid") j["path"] = l.path;
    return j;
}

nlohmann::ordered_json grid_json(const UniformGrid& g) {
    nlohmann::ordered_json j;
    j["min"] = g.min;
    j["max"] = g.max;
    j["points"] = g.points;
    return j;
}

nlohmann::ordered_json mode_json(const NoiseMode& m) {
    nlohmann::ordered_json j;
    j["kind"] = mode_kind_name(m.kind);
    j["amplitude"] = m.amplitude;
    j["frequency"] = m.frequency;
    j["phase"] = m.phase;
    j["center"] = m.center;
    j["width"] = m.width;
    return j;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    LineMap lines;
    json root;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        try {
            root = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("JSON parse error: ") + e.what());
        }
    } else {
        try {
            const toml::table tbl = toml::parse(text);
            root = from_toml(tbl, "", lines);
        } catch (const toml::parse_error& e) {
            std::ostringstream msg;
            msg << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
            throw ConfigError(msg.str());
        }
    }
    return from_json(root, lines, base_dir);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

nlohmann::ordered_json echo(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["mode"] = c.mode;
    auto& p = j["problem"];
    p["name"] = c.problem.name;
    p["params"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : c.problem.params) p["params"][k] = v;
    if (c.problem.initial) p["initial"] = law_json(*c.problem.initial);
    if (c.problem.terminal) p["terminal"] = law_json(*c.problem.terminal);

    auto& s = j["sim"];
    s["N"] = c.sim.particles;
    s["dt"] = c.sim.dt;
    s["T"] = c.sim.horizon;
    s["seed"] = c.sim.seed;
    s["kernel"] = kernel_name(c.sim.kernel);
    s["snapshot_times"] = c.sim.snapshot_times;
    s["snapshot_gradients"] = c.sim.snapshot_gradients;
    s["bandwidth"]["policy"] = c.sim.bandwidth.policy == BandwidthPolicy::silverman ? "silverman" : "fixed";
    s["bandwidth"]["value"] = c.sim.bandwidth.value;
    s["bandwidth"]["factor"] = c.sim.bandwidth.factor;
    s["bandwidth"]["floor"] = c.sim.bandwidth.floor;
    s["grid"] = grid_json(c.sim.grid);
    s["kde"]["method"] = kde_name(c.sim.kde.method);
    s["kde"]["threshold"] = c.sim.kde.binned_threshold;
    s["kde"]["bins_per_bandwidth"] = c.sim.kde.bins_per_bandwidth;
    s["kde"]["max_bins"] = c.sim.kde.max_bins;

    auto& e = j["environment"];
    e["environments"] = c.environment.environments;
    e["seed"] = c.environment.seed;
    if (c.environment.drift) e["drift"] = mode_json(*c.environment.drift);
    e["modes"] = nlohmann::ordered_json::array();
    for (const auto& m : c.environment.modes) e["modes"].push_back(mode_json(m));

    j["oracle"]["dt"] = c.oracle.dt;
    j["oracle"]["grid"] = grid_json(c.oracle.grid);
    j["compare"]["reference"] = c.compare.reference;
    j["compare"]["interpolate"] = c.compare.interpolate;
    return j;
}

Sampler build_law(const LawConfig& law, const std::filesystem::path& base_dir) {
    if (law.kind == "dirac") return Sampler::dirac(law.x0);
    if (law.kind == "gaussian") return Sampler::gaussian(law.mean, law.sd);
    if (law.kind == "uniform") return Sampler::uniform(law.a, law.b);
    std::filesystem::path p = law.path;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    GridTable table;
    try {
        table = read_grid_table_csv(p);
        return Sampler::grid_density(std::move(table.x), std::move(table.values));
    } catch (const std::exception& ex) {
        throw ConfigError("problem law: " + std::string(ex.what()));
    }
}

ProblemSpec build_problem(const RunConfig& c) {
    ParamMap params = c.problem.params;
    auto it = params.find("T");
    if (it == params.end()) {
        params["T"] = c.sim.horizon;
    } else if (std::abs(it->second - c.sim.horizon) > 1e-12 * c.sim.horizon) {
        throw ConfigError("problem.params.T: differs from sim.T");
    }
    ProblemSpec spec;
    try {
        spec = builtin_problem(c.problem.name, params);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("problem: ") + e.what());
    }
    if (c.problem.initial) {
        spec.initial_law = build_law(*c.problem.initial, c.base_dir);
        spec.terminal_law.reset();
    }
    if (c.problem.terminal) {
        spec.terminal_law = build_law(*c.problem.terminal, c.base_dir);
        spec.initial_law.reset();
    }
    return spec;
}

}  // namespace mfke::app
