// Problem-file parser. Format: '#' comments, [setting] / [coefficients] /
// [grid] sections, key = value lines. Coefficient values are expressions in
// the DSL; everything else is scalars, vectors (comma separated) or booleans.

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "gfbsde/model.hpp"

namespace gfbsde::model {

namespace {

struct RawValue {
    std::string text;
    int line = 0;
    int col = 0;
    bool used = false;
};

using Section = std::map<std::string, RawValue>;

struct RawConfig {
    std::map<std::string, Section> sections;
    std::map<std::string, int> section_lines;
};

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

RawConfig tokenize(const std::string& text) {
    RawConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ConfigError(lineno, 1, "malformed section header");
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section != "setting" && section != "coefficients" && section != "grid")
                throw ConfigError(lineno, 1, "unknown section [" + section + "]");
            cfg.sections[section];
            cfg.section_lines[section] = lineno;
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(lineno, 1, "expected 'key = value'");
        if (section.empty())
            throw ConfigError(lineno, 1, "key outside of any section");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(lineno, 1, "empty key");
        std::size_t vstart = eq + 1;
        while (vstart < line.size() && std::isspace(static_cast<unsigned char>(line[vstart])))
            ++vstart;
        RawValue v;
        v.text = trim(line.substr(eq + 1));
        v.line = lineno;
        v.col = static_cast<int>(vstart) + 1;
        if (v.text.empty()) throw ConfigError(lineno, v.col, "empty value for '" + key + "'");
        auto [it, inserted] = cfg.sections[section].emplace(key, v);
        if (!inserted)
            throw ConfigError(lineno, 1, "duplicate key '" + key + "'");
    }
    return cfg;
}

class SectionReader {
public:
    SectionReader(RawConfig& cfg, const std::string& name, bool required) : name_(name) {
        auto it = cfg.sections.find(name);
        if (it == cfg.sections.end()) {
            if (required) throw ConfigError(1, 1, "missing required section [" + name + "]");
            sec_ = nullptr;
        } else {
            sec_ = &it->second;
        }
    }

    bool present() const { return sec_ != nullptr; }

    RawValue* find(const std::string& key) {
        if (!sec_) return nullptr;
        auto it = sec_->find(key);
        if (it == sec_->end()) return nullptr;
        it->second.used = true;
        return &it->second;
    }

    RawValue& require(const std::string& key) {
        RawValue* v = find(key);
        if (!v)
            throw ConfigError(1, 1, "missing key '" + key + "' in section [" + name_ + "]");
        return *v;
    }

    double number(const std::string& key) { return to_number(require(key)); }

    double number_or(const std::string& key, double fallback) {
        RawValue* v = find(key);
        return v ? to_number(*v) : fallback;
    }

    int integer(const std::string& key) { return to_int(require(key)); }

    int integer_or(const std::string& key, int fallback) {
        RawValue* v = find(key);
        return v ? to_int(*v) : fallback;
    }

    bool flag_or(const std::string& key, bool fallback) {
        RawValue* v = find(key);
        if (!v) return fallback;
        if (v->text == "true") return true;
        if (v->text == "false") return false;
        throw ConfigError(v->line, v->col, "expected true or false");
    }

    std::vector<double> vector(const std::string& key, int expected) {
        return to_vector(require(key), expected);
    }

    std::optional<std::vector<double>> vector_opt(const std::string& key, int expected) {
        RawValue* v = find(key);
        if (!v) return std::nullopt;
        return to_vector(*v, expected);
    }

    void reject_unknown() const {
        if (!sec_) return;
        for (const auto& [key, v] : *sec_)
            if (!v.used)
                throw ConfigError(v.line, 1, "unknown key '" + key + "' in section [" + name_ + "]");
    }

private:
    static double to_number(const RawValue& v) {
        char* end = nullptr;
        const double x = std::strtod(v.text.c_str(), &end);
        if (end != v.text.c_str() + v.text.size())
            throw ConfigError(v.line, v.col, "malformed number '" + v.text + "'");
        return x;
    }
    static int to_int(const RawValue& v) {
        const double x = to_number(v);
        const int k = static_cast<int>(x);
        if (static_cast<double>(k) != x)
            throw ConfigError(v.line, v.col, "expected integer, got '" + v.text + "'");
        return k;
    }
    static std::vector<double> to_vector(const RawValue& v, int expected) {
        std::vector<double> out;
        std::size_t pos = 0;
        while (pos <= v.text.size()) {
            std::size_t comma = v.text.find(',', pos);
            if (comma == std::string::npos) comma = v.text.size();
            RawValue piece{trim(v.text.substr(pos, comma - pos)), v.line,
                           v.col + static_cast<int>(pos), false};
            if (piece.text.empty())
                throw ConfigError(v.line, piece.col, "empty vector component");
            out.push_back(to_number(piece));
            pos = comma + 1;
            if (comma == v.text.size()) break;
        }
        if (expected > 0 && out.size() != static_cast<std::size_t>(expected))
            throw ConfigError(v.line, v.col,
                              "expected " + std::to_string(expected) + " components, got " +
                                  std::to_string(out.size()));
        return out;
    }

    Section* sec_;
    std::string name_;
};

expr::Program parse_coeff(SectionReader& sec, const std::string& base, int component, int n,
                          bool allow_y, bool allow_z) {
    // "b" is accepted as an alias for "b1" when n == 1.
    RawValue* v = sec.find(base + std::to_string(component + 1));
    if (!v && n == 1) v = sec.find(base);
    if (!v)
        throw ConfigError(1, 1, "missing coefficient '" + base +
                                    (n == 1 ? "" : std::to_string(component + 1)) +
                                    "' in section [coefficients]");
    return expr::parse(v->text, expr::coefficient_vars(n, true, allow_y, allow_z), v->line, v->col);
}

} // namespace

Problem parse_problem_string(const std::string& text, const std::string& name) {
    RawConfig cfg = tokenize(text);
    Problem prob;
    prob.name = name;

    SectionReader setting(cfg, "setting", true);
    GSetting& s = prob.setting;
    s.sigma_low = setting.number("sigma_low");
    s.sigma_high = setting.number("sigma_high");
    s.p = setting.number("p");
    s.beta = setting.number("beta");
    s.n = setting.integer("n");
    if (s.n < 1 || s.n > kMaxDim)
        throw ConfigError(1, 1, "n must be between 1 and " + std::to_string(kMaxDim));
    s.horizon = setting.number("T");
    s.x0 = setting.vector("x0", s.n);
    s.classical_reduction = setting.flag_or("classical_reduction", false);
    setting.reject_unknown();

    SectionReader coeff(cfg, "coefficients", true);
    CoefficientSet& c = prob.coeffs;
    c.n = s.n;
    for (int j = 0; j < s.n; ++j) {
        c.b.push_back(parse_coeff(coeff, "b", j, s.n, true, false));
        c.h.push_back(parse_coeff(coeff, "h", j, s.n, true, false));
        c.sigma.push_back(parse_coeff(coeff, "sigma", j, s.n, true, false));
    }
    {
        RawValue& fv = coeff.require("f");
        c.f = expr::parse(fv.text, expr::coefficient_vars(s.n, true, true, true), fv.line, fv.col);
        RawValue& gv = coeff.require("g");
        c.g = expr::parse(gv.text, expr::coefficient_vars(s.n, true, true, true), gv.line, gv.col);
        RawValue& pv = coeff.require("phi");
        c.phi = expr::parse(pv.text, expr::coefficient_vars(s.n, false, false, false), pv.line, pv.col);
    }
    c.L1 = coeff.number("L1");
    c.L2 = coeff.number("L2");
    c.L3 = coeff.number("L3");
    c.sigma_depends_on_y = coeff.flag_or("sigma_depends_on_y", false);
    coeff.reject_unknown();

    SectionReader grid(cfg, "grid", false);
    DiscretizationGrid& g = prob.grid;
    g.horizon = s.horizon;
    if (grid.present()) {
        g.n_steps = grid.integer_or("n_steps", 64);
        g.n_space = grid.integer_or("n_space", 257);
        auto lov = grid.vector_opt("space_min", s.n);
        auto hiv = grid.vector_opt("space_max", s.n);
        if (lov.has_value() != hiv.has_value())
            throw ConfigError(cfg.section_lines["grid"], 1,
                              "space_min and space_max must be given together");
        if (lov) {
            g.space_min = *lov;
            g.space_max = *hiv;
        } else {
            default_box(s, g.space_min, g.space_max);
        }
        if (RawValue* q = grid.find("quadrature")) {
            if (q->text == "two-point")
                g.quadrature = Quadrature::two_point;
            else if (q->text == "gh3")
                g.quadrature = Quadrature::gauss_hermite_3;
            else if (q->text == "gh5")
                g.quadrature = Quadrature::gauss_hermite_5;
            else
                throw ConfigError(q->line, q->col,
                                  "quadrature must be one of two-point, gh3, gh5");
        }
        grid.reject_unknown();
    } else {
        g.n_steps = 64;
        g.n_space = 257;
        default_box(s, g.space_min, g.space_max);
    }
    if (g.n_steps < 1)
        throw ConfigError(1, 1, "n_steps must be >= 1");
    if (g.n_space < 2)
        throw ConfigError(1, 1, "n_space must be >= 2");

    return prob;
}

Problem parse_problem_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open problem file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string name = path;
    const std::size_t slash = name.find_last_of('/');
    if (slash != std::string::npos) name = name.substr(slash + 1);
    const std::size_t dot = name.find_last_of('.');
    if (dot != std::string::npos) name = name.substr(0, dot);
    return parse_problem_string(buf.str(), name);
}

} // namespace gfbsde::model
