#include "hopmp/specfile.hpp"

#include <cmath>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "hopmp/errors.hpp"
#include "hopmp/text.hpp"

namespace hopmp {

namespace {

struct Entry {
    std::string value;
    std::size_t line = 0;
    std::size_t column = 0;  // 1-based column of the value
};

struct Section {
    std::size_t line = 0;
    std::map<std::string, Entry> entries;
};

const std::set<std::string>& known_sections() {
    static const std::set<std::string> s{"problem", "dynamics", "cost", "control", "init", "numerics", "control0"};
    return s;
}

bool is_key(std::string_view k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

std::map<std::string, Section> read_sections(std::string_view text) {
    std::map<std::string, Section> out;
    Section* current = nullptr;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        const auto body = trim(raw);
        if (body.empty()) continue;
        const std::size_t col = static_cast<std::size_t>(body.data() - raw.data()) + 1;

        if (body.front() == '[') {
            if (body.back() != ']') throw SpecSyntaxError(line_no, col, "section header must end with ']'");
            const std::string name(trim(body.substr(1, body.size() - 2)));
            if (!known_sections().count(name)) throw SpecSyntaxError(line_no, col, "unknown section [" + name + "]");
            if (out.count(name)) throw SpecSyntaxError(line_no, col, "section [" + name + "] appears twice");
            current = &out[name];
            current->line = line_no;
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw SpecSyntaxError(line_no, col, "expected 'key = value'");
        if (!current) throw SpecSyntaxError(line_no, col, "entry outside of any section");
        const std::string key(trim(body.substr(0, eq)));
        if (!is_key(key)) throw SpecSyntaxError(line_no, col, "malformed key '" + key + "'");
        const auto value_raw = body.substr(eq + 1);
        const auto value = trim(value_raw);
        if (value.empty()) throw SpecSyntaxError(line_no, col + eq + 1, "empty value for '" + key + "'");
        if (current->entries.count(key)) throw SpecSyntaxError(line_no, col, "duplicate key '" + key + "'");
        const std::size_t value_col = col + eq + 1 + static_cast<std::size_t>(value.data() - value_raw.data());
        current->entries[key] = Entry{std::string(value), line_no, value_col};
    }
    return out;
}

class Reader {
public:
    Reader(std::map<std::string, Section> sections, std::size_t last_line)
        : sections_(std::move(sections)), last_line_(last_line) {}

    const Section* section(const std::string& name) const {
        auto it = sections_.find(name);
        return it == sections_.end() ? nullptr : &it->second;
    }

    const Section& require_section(const std::string& name) const {
        if (const Section* s = section(name)) return *s;
        throw SpecSyntaxError(last_line_, 1, "missing section [" + name + "]");
    }

    const Entry* find(const std::string& sec, const std::string& key) const {
        const Section* s = section(sec);
        if (!s) return nullptr;
        auto it = s->entries.find(key);
        return it == s->entries.end() ? nullptr : &it->second;
    }

    const Entry& require(const std::string& sec, const std::string& key) const {
        if (const Entry* e = find(sec, key)) return *e;
        const Section* s = section(sec);
        throw SpecSyntaxError(s ? s->line : last_line_, 1, "missing [" + sec + "] " + key);
    }

    static double number(const Entry& e) {
        try {
            return parse_double(e.value);
        } catch (const Error& err) {
            throw SpecSyntaxError(e.line, e.column, err.what());
        }
    }

    static int integer(const Entry& e) {
        const double v = number(e);
        if (v != std::floor(v) || std::abs(v) > 1e9) throw SpecSyntaxError(e.line, e.column, "expected an integer");
        return static_cast<int>(v);
    }

    static std::vector<double> numbers(const Entry& e, std::string_view text, std::size_t offset = 0) {
        std::vector<double> out;
        for (auto f : split(text, ',')) {
            try {
                out.push_back(parse_double(f));
            } catch (const Error& err) {
                const std::size_t at = f.empty() ? offset : offset + static_cast<std::size_t>(f.data() - text.data());
                throw SpecSyntaxError(e.line, e.column + at, err.what());
            }
        }
        return out;
    }

    /// Rejects keys that the caller did not declare.
    void only(const std::string& sec, const std::function<bool(const std::string&)>& allowed) const {
        const Section* s = section(sec);
        if (!s) return;
        for (const auto& [key, e] : s->entries)
            if (!allowed(key)) throw SpecSyntaxError(e.line, 1, "unknown key '" + key + "' in [" + sec + "]");
    }

private:
    std::map<std::string, Section> sections_;
    std::size_t last_line_;
};

Expr expression(const Entry& e, const Schema& schema, const std::string& what) {
    try {
        return parse(e.value, schema);
    } catch (const SyntaxError& err) {
        throw SpecSyntaxError(e.line, e.column + err.position(), what + ": " + err.what());
    } catch (const UnknownSymbol& err) {
        throw ValidationFailed({what + ": " + err.what()});
    } catch (const DerivativeOrderTooHigh& err) {
        throw ValidationFailed({what + ": " + err.what()});
    }
}

// "f3" -> 3; "x2_1" -> (2, 1).
std::optional<int> indexed(const std::string& key, char prefix) {
    if (key.size() < 2 || key.size() > 7 || key[0] != prefix) return std::nullopt;
    for (std::size_t i = 1; i < key.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(key[i]))) return std::nullopt;
    return std::stoi(key.substr(1));
}

std::optional<std::pair<int, int>> jet_key(const std::string& key) {
    const auto us = key.find('_');
    if (us == std::string::npos) return std::nullopt;
    const auto comp = indexed(key.substr(0, us), 'x');
    const std::string order = key.substr(us + 1);
    if (!comp || order.empty() || order.size() > 6) return std::nullopt;
    for (char c : order)
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    return std::pair{*comp, std::stoi(order)};
}

std::optional<std::pair<int, bool>> bound_key(const std::string& key) {
    for (const char* suffix : {"_lower", "_upper"}) {
        const std::string s(suffix);
        if (key.size() > s.size() && key.compare(key.size() - s.size(), s.size(), s) == 0) {
            const auto l = indexed(key.substr(0, key.size() - s.size()), 'd');
            if (l) return std::pair{*l, s == "_upper"};
        }
    }
    return std::nullopt;
}

}  // namespace

TerminalConvention parse_convention(std::string_view name) {
    if (name == "derived") return TerminalConvention::Derived;
    if (name == "printed") return TerminalConvention::AsPrinted;
    throw Error("convention must be 'derived' or 'printed'");
}

SpecFile parse_spec_text(std::string_view text, const std::filesystem::path& base) {
    std::size_t lines = 1;
    for (char c : text) lines += c == '\n';
    const Reader r(read_sections(text), lines);
    std::vector<std::string> defaults;
    std::vector<std::string> problems;

    r.require_section("problem");
    r.only("problem", [](const std::string& k) {
        return k == "order" || k == "state_dim" || k == "control_dim" || k == "horizon";
    });
    ProblemDefinition def;
    def.order = Reader::integer(r.require("problem", "order"));
    def.horizon = Reader::number(r.require("problem", "horizon"));
    auto int_or = [&](const char* sec, const char* key, int fallback) {
        if (const Entry* e = r.find(sec, key)) return Reader::integer(*e);
        defaults.push_back(std::string(sec) + "." + key + " = " + std::to_string(fallback));
        return fallback;
    };
    def.state_dim = int_or("problem", "state_dim", 1);
    def.control_dim = int_or("problem", "control_dim", 1);
    const int k = def.order;
    const int n = def.state_dim;
    const int m = def.control_dim;
    if (k < 1 || n < 1 || m < 1)
        throw ValidationFailed({"order, state_dim and control_dim must be positive"});
    const Schema schema = Schema::jets(k, n, m);

    const Section& dyn = r.require_section("dynamics");
    r.only("dynamics", [&](const std::string& key) {
        const auto i = indexed(key, 'f');
        return i && *i >= 1 && *i <= n;
    });
    for (int i = 1; i <= n; ++i) {
        const std::string key = "f" + std::to_string(i);
        const Entry* e = r.find("dynamics", key);
        if (!e) throw SpecSyntaxError(dyn.line, 1, "missing [dynamics] " + key);
        def.dynamics.push_back(expression(*e, schema, "dynamics " + key));
    }

    r.require_section("cost");
    r.only("cost", [](const std::string& key) { return key == "C"; });
    def.cost = expression(r.require("cost", "C"), schema, "cost");

    r.require_section("control");
    r.only("control", [&](const std::string& key) {
        if (key == "kind" || key == "lower" || key == "upper" || key == "points" || key == "hat_inflation" ||
            key == "hat_lower" || key == "hat_upper")
            return true;
        const auto b = bound_key(key);
        return b && b->first >= 1 && b->first <= k - 1;
    });
    const Entry& kind = r.require("control", "kind");
    if (kind.value == "box") {
        const Entry& lo = r.require("control", "lower");
        const Entry& hi = r.require("control", "upper");
        def.control_set = ControlSet::from_box(Reader::numbers(lo, lo.value), Reader::numbers(hi, hi.value));
    } else if (kind.value == "points") {
        const Entry& pts = r.require("control", "points");
        std::vector<std::vector<double>> points;
        for (auto field : split(pts.value, ';'))
            points.push_back(Reader::numbers(pts, field, static_cast<std::size_t>(field.data() - pts.value.data())));
        def.control_set = ControlSet::from_points(std::move(points));
    } else {
        throw SpecSyntaxError(kind.line, kind.column, "control kind must be 'box' or 'points'");
    }
    for (int l = 1; l <= k - 1; ++l) {
        const Entry* lo = r.find("control", "d" + std::to_string(l) + "_lower");
        const Entry* hi = r.find("control", "d" + std::to_string(l) + "_upper");
        if (!lo && !hi) continue;
        def.derivative_bounds.resize(static_cast<std::size_t>(l), Box::unbounded(static_cast<std::size_t>(m)));
        Box& b = def.derivative_bounds.back();
        if (lo) b.lower = Reader::numbers(*lo, lo->value);
        if (hi) b.upper = Reader::numbers(*hi, hi->value);
    }
    if (const Entry* e = r.find("control", "hat_inflation")) {
        def.hat_inflation = Reader::number(*e);
    } else {
        defaults.push_back("control.hat_inflation = " + format_double(def.hat_inflation));
    }
    {
        const Entry* lo = r.find("control", "hat_lower");
        const Entry* hi = r.find("control", "hat_upper");
        if (static_cast<bool>(lo) != static_cast<bool>(hi))
            throw SpecSyntaxError((lo ? lo : hi)->line, 1, "hat_lower and hat_upper must be given together");
        if (lo) def.hat = Box{Reader::numbers(*lo, lo->value), Reader::numbers(*hi, hi->value)};
    }

    def.initial.assign(static_cast<std::size_t>(k * n), 0.0);
    r.only("init", [](const std::string& key) { return jet_key(key).has_value(); });
    if (const Section* init = r.section("init")) {
        for (const auto& [key, e] : init->entries) {
            const auto [i, s] = *jet_key(key);
            if (i < 1 || i > n || s >= k) {
                problems.push_back("initial entry " + key + " is outside the initial jet x_(0.." +
                                   std::to_string(k - 1) + ")");
                continue;
            }
            def.initial[static_cast<std::size_t>(s * n + i - 1)] = Reader::number(e);
        }
        if (static_cast<int>(init->entries.size()) < k * n) defaults.push_back("init: unspecified jets = 0");
    } else {
        defaults.push_back("init: all jets = 0");
    }
    if (!problems.empty()) throw ValidationFailed(problems);

    Numerics num;
    r.only("numerics", [](const std::string& key) {
        return key == "grid" || key == "tol" || key == "pmp_tol" || key == "convention" || key == "richardson";
    });
    if (const Entry* e = r.find("numerics", "grid"))
        num.forward.grid = Reader::integer(*e);
    else
        defaults.push_back("numerics.grid = " + std::to_string(num.forward.grid));
    if (const Entry* e = r.find("numerics", "tol"))
        num.forward.tolerance = Reader::number(*e);
    else
        defaults.push_back("numerics.tol = " + format_double(num.forward.tolerance));
    if (const Entry* e = r.find("numerics", "pmp_tol"))
        num.pmp_tolerance = Reader::number(*e);
    else
        defaults.push_back("numerics.pmp_tol = " + format_double(num.pmp_tolerance));
    if (const Entry* e = r.find("numerics", "convention")) {
        try {
            num.convention = parse_convention(e->value);
        } catch (const Error& err) {
            throw SpecSyntaxError(e->line, e->column, err.what());
        }
    } else {
        defaults.push_back("numerics.convention = derived");
    }
    if (const Entry* e = r.find("numerics", "richardson")) {
        if (e->value != "true" && e->value != "false")
            throw SpecSyntaxError(e->line, e->column, "richardson must be 'true' or 'false'");
        num.forward.richardson = e->value == "true";
    }
    if (num.forward.grid < 1) throw ValidationFailed({"numerics.grid must be positive"});
    if (!(num.forward.tolerance > 0.0)) throw ValidationFailed({"numerics.tol must be positive"});

    r.only("control0", [](const std::string& key) { return key == "desc"; });
    std::string desc;
    const Entry* d = r.find("control0", "desc");
    if (d) {
        desc = d->value;
        if (desc.rfind("file:", 0) == 0 && !base.empty()) {
            std::filesystem::path p(std::string(trim(std::string_view(desc).substr(5))));
            if (p.is_relative()) desc = "file:" + (base / p).string();
        }
    } else {
        desc = "const:" + join_doubles(std::vector<double>(static_cast<std::size_t>(m), 0.0), ",");
        defaults.push_back("control0.desc = " + desc);
    }

    Problem problem(std::move(def));
    ControlCurve u0;
    try {
        u0 = parse_control_descriptor(desc, problem.horizon(), m);
    } catch (const Error& err) {
        if (d) throw SpecSyntaxError(d->line, d->column, err.what());
        throw;
    }
    return SpecFile{std::move(problem), std::move(u0), num, std::move(defaults)};
}

SpecFile parse_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SpecSyntaxError(0, 0, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_spec_text(ss.str(), path.parent_path());
}

}  // namespace hopmp
