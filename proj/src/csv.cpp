#include "mfke/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mfke {

std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

void write_snapshots_csv(std::ostream& out, const std::vector<DensitySnapshot>& snapshots) {
    out << "t,x,u,mass\n";
    for (const auto& s : snapshots) {
        const std::string t = format_double(s.time);
        const std::string m = format_double(s.mass);
        for (std::size_t i = 0; i < s.grid.size(); ++i) {
            out << t << ',' << format_double(s.grid[i]) << ',' << format_double(s.values[i]) << ',' << m << '\n';
        }
    }
}

void write_snapshots_csv(const std::filesystem::path& path, const std::vector<DensitySnapshot>& snapshots) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_snapshots_csv(out, snapshots);
}

namespace {

double parse_field(std::string_view text, std::size_t line) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw std::runtime_error("line " + std::to_string(line) + ": not a number: '" + std::string(text) + "'");
    }
    return v;
}

std::vector<double> split_numbers(const std::string& row, std::size_t expected, std::size_t line) {
    std::vector<double> out;
    std::size_t start = 0;
    std::string_view sv(row);
    while (start <= sv.size()) {
        const std::size_t comma = sv.find(',', start);
        const std::size_t stop = comma == std::string_view::npos ? sv.size() : comma;
        out.push_back(parse_field(sv.substr(start, stop - start), line));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (out.size() != expected) {
        throw std::runtime_error("line " + std::to_string(line) + ": expected " + std::to_string(expected) + " columns");
    }
    return out;
}

std::string trim_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

std::vector<DensitySnapshot> read_snapshots_csv(std::istream& in) {
    std::string row;
    if (!std::getline(in, row) || trim_cr(row) != "t,x,u,mass") {
        throw std::runtime_error("line 1: expected header 't,x,u,mass'");
    }
    std::vector<DensitySnapshot> out;
    std::size_t line = 1;
    while (std::getline(in, row)) {
        ++line;
        row = trim_cr(row);
        if (row.empty()) continue;
        const auto f = split_numbers(row, 4, line);
        if (out.empty() || out.back().time != f[0]) {
            out.push_back(DensitySnapshot{f[0], {}, {}, f[3]});
        }
        out.back().grid.push_back(f[1]);
        out.back().values.push_back(f[2]);
    }
    for (const auto& s : out) s.validate();
    return out;
}

std::vector<DensitySnapshot> read_snapshots_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return read_snapshots_csv(in);
}

GridTable read_grid_table_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string row;
    if (!std::getline(in, row) || trim_cr(row) != "x,u0") throw std::runtime_error("line 1: expected header 'x,u0'");
    GridTable t;
    std::size_t line = 1;
    while (std::getline(in, row)) {
        ++line;
        row = trim_cr(row);
        if (row.empty()) continue;
        const auto f = split_numbers(row, 2, line);
        t.x.push_back(f[0]);
        t.values.push_back(f[1]);
    }
    return t;
}

}  // namespace mfke
