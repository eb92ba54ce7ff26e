#include "gvmult/text_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gvmult/errors.hpp"

namespace gvmult {

namespace {

// Next non-blank, non-comment line; false at end of input.
bool next_line(std::istream& in, std::string& line, int& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        return true;
    }
    return false;
}

[[noreturn]] void bad(const std::string& what, int lineno) {
    std::ostringstream os;
    os << what << " (line " << lineno << ")";
    throw ValidationError(os.str());
}

double parse_number(const std::string& token, int lineno) {
    if (token == "inf" || token == "+inf") return AT_INFINITY;
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) bad("malformed number '" + token + "'", lineno);
        return v;
    } catch (const std::logic_error&) {
        bad("malformed number '" + token + "'", lineno);
    }
}

std::vector<std::string> tokens(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::ifstream open(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return in;
}

}  // namespace

DiffusionSpec read_tabulated(std::istream& in) {
    std::string line;
    int lineno = 0;
    if (!next_line(in, line, lineno)) throw ValidationError("tabulated file: empty input");
    auto head = tokens(line);
    if (head.size() != 3 || head[0] != "tabulated") bad("expected 'tabulated <n> <y_max>'", lineno);
    const double nd = parse_number(head[1], lineno);
    const double y_max = parse_number(head[2], lineno);
    if (!(nd >= 1.0) || nd != std::floor(nd)) bad("node count must be a positive integer", lineno);
    const auto n = static_cast<std::size_t>(nd);
    std::vector<double> y, a, b;
    for (std::size_t i = 0; i < n; ++i) {
        if (!next_line(in, line, lineno)) bad("tabulated file: fewer rows than declared", lineno);
        auto t = tokens(line);
        if (t.size() != 3) bad("expected 'y a b'", lineno);
        y.push_back(parse_number(t[0], lineno));
        a.push_back(parse_number(t[1], lineno));
        b.push_back(parse_number(t[2], lineno));
    }
    if (next_line(in, line, lineno)) bad("tabulated file: trailing data", lineno);
    return DiffusionSpec::tabulated(std::move(y), std::move(a), std::move(b), y_max);
}

MeasureAlpha read_measure(std::istream& in) {
    MeasureAlpha alpha;
    std::string line;
    int lineno = 0;
    while (next_line(in, line, lineno)) {
        auto t = tokens(line);
        if (t.size() == 4 && t[0] == "atom") {
            const double loc = parse_number(t[1], lineno);
            if (!(loc >= 0.0)) bad("atom location must be >= 0", lineno);
            alpha += MeasureAlpha::dirac(loc, cplx(parse_number(t[2], lineno), parse_number(t[3], lineno)));
        } else if (t.size() == 5 && t[0] == "density") {
            const double y = parse_number(t[1], lineno), w = parse_number(t[2], lineno);
            if (!(y > 0.0) || !std::isfinite(y) || !(w >= 0.0)) bad("density node needs y > 0 and w >= 0", lineno);
            alpha.density.push_back({y, w, cplx(parse_number(t[3], lineno), parse_number(t[4], lineno))});
        } else {
            bad("expected 'atom <loc|inf> <re> <im>' or 'density <y> <w> <re> <im>'", lineno);
        }
    }
    return alpha;
}

TorusField read_field(std::istream& in) {
    std::string line;
    int lineno = 0;
    if (!next_line(in, line, lineno)) throw ValidationError("field file: empty input");
    auto head = tokens(line);
    if (head.size() != 3 || head[0] != "field") bad("expected 'field <dim> <n>'", lineno);
    TorusGrid grid{static_cast<int>(parse_number(head[1], lineno)), static_cast<int>(parse_number(head[2], lineno))};
    grid.validate();
    TorusField f = TorusField::zeros(grid);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        if (!next_line(in, line, lineno)) bad("field file: fewer values than n^dim", lineno);
        auto t = tokens(line);
        if (t.size() != 2) bad("expected 're im'", lineno);
        f.values[i] = cplx(parse_number(t[0], lineno), parse_number(t[1], lineno));
    }
    if (next_line(in, line, lineno)) bad("field file: trailing data", lineno);
    f.validate();
    return f;
}

void write_field(std::ostream& out, const TorusField& f) {
    out << "field " << f.grid.dim << ' ' << f.grid.n << '\n';
    for (Eigen::Index i = 0; i < f.values.size(); ++i)
        out << fmt(f.values[i].real()) << ' ' << fmt(f.values[i].imag()) << '\n';
}

DiffusionSpec load_tabulated(const std::string& path) {
    auto in = open(path);
    return read_tabulated(in);
}

MeasureAlpha load_measure(const std::string& path) {
    auto in = open(path);
    return read_measure(in);
}

TorusField load_field(const std::string& path) {
    auto in = open(path);
    return read_field(in);
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------------------

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    int lineno = 0;
    while (next_line(in, line, lineno)) {
        if (line.find('=') == std::string::npos) bad("expected key=value", lineno);
        cfg.set_assignment(line);
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    auto in = open(path);
    return parse(in);
}

void KeyValueConfig::set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ValidationError("expected key=value, got '" + assignment + "'");
    const std::string key = trim(assignment.substr(0, eq));
    if (key.empty()) throw ValidationError("empty key in '" + assignment + "'");
    values_[key] = trim(assignment.substr(eq + 1));
}

std::string KeyValueConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError("missing config key '" + key + "'");
    return it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
    const std::string v = get(key);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::logic_error&) {
    }
    throw ValidationError("config key '" + key + "': not a number: '" + v + "'");
}

long long KeyValueConfig::get_int(const std::string& key) const {
    const std::string v = get(key);
    try {
        std::size_t used = 0;
        const long long d = std::stoll(v, &used);
        if (used == v.size()) return d;
    } catch (const std::logic_error&) {
    }
    // Accept 2e5-style integers.
    const double d = get_double(key);
    if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long long>(d);
    throw ValidationError("config key '" + key + "': not an integer: '" + v + "'");
}

bool KeyValueConfig::get_bool(const std::string& key) const {
    const std::string v = get(key);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ValidationError("config key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream is(get(key));
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
    std::vector<double> out;
    int dummy = 0;
    for (const auto& item : get_list(key)) {
        try {
            out.push_back(parse_number(item, dummy));
        } catch (const ValidationError&) {
            throw ValidationError("config key '" + key + "': not a number: '" + item + "'");
        }
    }
    return out;
}

void write_preamble(std::ostream& out, const KeyValueConfig& cfg) {
    out << "# schema=" << kSchemaVersion << '\n';
    for (const auto& [k, v] : cfg.values()) out << "# " << k << '=' << v << '\n';
}

void write_ensemble_csv(std::ostream& out, const EnsembleResult& r) {
    const bool two = r.estimate.grid.dim == 2;
    out << "bin_center" << (two ? ",bin_center2" : "") << ",estimate_re,estimate_im,std_error,n_effective\n";
    for (Eigen::Index b = 0; b < r.estimate.values.size(); ++b) {
        const auto c = r.bin_center(b);
        out << fmt(c[0]);
        if (two) out << ',' << fmt(c[1]);
        out << ',' << fmt(r.estimate.values[b].real()) << ',' << fmt(r.estimate.values[b].imag()) << ','
            << fmt(r.std_error[b]) << ',' << r.n_effective[b] << '\n';
    }
}

}  // namespace gvmult
