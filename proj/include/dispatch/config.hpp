#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dispatch/errors.hpp"
#include "dispatch/scenario.hpp"

namespace dispatch {
namespace cfg_detail {

struct Value {
    enum class Kind { Number, String, NumberList, PairList } kind = Kind::Number;
    double number = 0.0;
    std::string text;
    std::vector<double> numbers;
    std::vector<std::pair<double, double>> pairs;
};

struct Section {
    std::string name;
    std::map<std::string, Value> entries;
};

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

inline double parse_number(const std::string& s, int line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (trim(s.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw ParseError("config line " + std::to_string(line_no) + ": expected a number, got '" + s + "'");
}

inline Value parse_value(const std::string& raw, int line_no) {
    Value v;
    const std::string s = trim(raw);
    if (s.empty()) throw ParseError("config line " + std::to_string(line_no) + ": missing value");
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"')
            throw ParseError("config line " + std::to_string(line_no) + ": unterminated string");
        v.kind = Value::Kind::String;
        v.text = s.substr(1, s.size() - 2);
        return v;
    }
    if (s.front() == '[') {
        if (s.back() != ']')
            throw ParseError("config line " + std::to_string(line_no) + ": unterminated array");
        const std::string body = trim(s.substr(1, s.size() - 2));
        if (!body.empty() && body.front() == '[') {
            v.kind = Value::Kind::PairList;
            std::size_t pos = 0;
            while (pos < body.size()) {
                const std::size_t open = body.find('[', pos);
                if (open == std::string::npos) break;
                const std::size_t close = body.find(']', open);
                if (close == std::string::npos)
                    throw ParseError("config line " + std::to_string(line_no) + ": unterminated pair");
                std::string inner = body.substr(open + 1, close - open - 1);
                const std::size_t comma = inner.find(',');
                if (comma == std::string::npos)
                    throw ParseError("config line " + std::to_string(line_no) + ": pair needs two entries");
                v.pairs.emplace_back(parse_number(trim(inner.substr(0, comma)), line_no),
                                     parse_number(trim(inner.substr(comma + 1)), line_no));
                pos = close + 1;
            }
            return v;
        }
        v.kind = Value::Kind::NumberList;
        std::stringstream ss(body);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const std::string c = trim(cell);
            if (!c.empty()) v.numbers.push_back(parse_number(c, line_no));
        }
        return v;
    }
    v.kind = Value::Kind::Number;
    v.number = parse_number(s, line_no);
    return v;
}

struct Document {
    std::vector<Section> sections;

    const Section* find(const std::string& name) const {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }
};

inline Document parse_document(const std::string& text) {
    Document doc;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    Section* cur = nullptr;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            std::string name;
            if (line.size() > 3 && line[1] == '[' && line.substr(line.size() - 2) == "]]")
                name = "[]" + trim(line.substr(2, line.size() - 4));
            else if (line.back() == ']')
                name = trim(line.substr(1, line.size() - 2));
            else
                throw ParseError("config line " + std::to_string(line_no) + ": malformed section header");
            doc.sections.push_back(Section{name, {}});
            cur = &doc.sections.back();
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        if (cur == nullptr)
            throw ParseError("config line " + std::to_string(line_no) + ": key outside any section");
        const std::string key = trim(line.substr(0, eq));
        cur->entries[key] = parse_value(line.substr(eq + 1), line_no);
    }
    return doc;
}

inline double get_number(const Section& s, const std::string& key, std::optional<double> fallback = {}) {
    const auto it = s.entries.find(key);
    if (it == s.entries.end()) {
        if (fallback) return *fallback;
        throw ParseError("config section [" + s.name + "]: missing key '" + key + "'");
    }
    if (it->second.kind != Value::Kind::Number)
        throw ParseError("config section [" + s.name + "]: key '" + key + "' must be a number");
    return it->second.number;
}

inline std::string get_string(const Section& s, const std::string& key,
                              std::optional<std::string> fallback = {}) {
    const auto it = s.entries.find(key);
    if (it == s.entries.end()) {
        if (fallback) return *fallback;
        throw ParseError("config section [" + s.name + "]: missing key '" + key + "'");
    }
    if (it->second.kind != Value::Kind::String)
        throw ParseError("config section [" + s.name + "]: key '" + key + "' must be a string");
    return it->second.text;
}

inline CostFunction parse_cost(const Section& s, double capacity, bool generation, double lbar) {
    const std::string kind = get_string(s, "cost.kind", generation ? std::string("quadratic")
                                                                   : std::string("poly8"));
    if (kind == "quadratic") {
        const double gain = get_number(s, "cost.gain", 1.0);
        const double center = generation ? lbar : get_number(s, "cost.center", 0.0);
        return CostFunction::quadratic(gain, center);
    }
    if (kind == "poly8" || kind == "scaled_polynomial") {
        const double k1 = get_number(s, "cost.kappa1", 1.0);
        const double k2 = get_number(s, "cost.kappa2", 0.1);
        return CostFunction::scaled_polynomial(k1, k2, capacity);
    }
    throw ParseError("config section [" + s.name + "]: unknown cost.kind '" + kind + "'");
}

}  // namespace cfg_detail

/// Parse and validate a scenario config (sections [grid], [generation],
/// [[class]], [initial], [netload]).  `csv_loader` resolves a csv path to its
/// contents when [netload] kind = "csv".
inline Scenario load_scenario(
    const std::string& config_text,
    const std::function<std::string(const std::string&)>& csv_loader = {},
    std::optional<int> steps_override = {}) {
    using namespace cfg_detail;
    const Document doc = parse_document(config_text);

    Scenario sc;
    if (const Section* g = doc.find("grid")) {
        sc.grid.horizon_hours = get_number(*g, "horizon_hours", 24.0);
        sc.grid.steps = static_cast<int>(get_number(*g, "steps", 576.0));
    }
    if (steps_override) sc.grid.steps = *steps_override;
    sc.grid.validate();

    const Section* nl = doc.find("netload");
    if (nl == nullptr) throw ParseError("config: missing [netload] section");
    const std::string kind = get_string(*nl, "kind");
    if (kind == "duck") {
        sc.net_load = synth_duck_curve(sc.grid, get_number(*nl, "base_gw", 30.0),
                                       get_number(*nl, "swing_gw", 40.0),
                                       static_cast<std::uint64_t>(get_number(*nl, "seed", 0.0)));
    } else if (kind == "steps") {
        const auto it = nl->entries.find("levels");
        if (it == nl->entries.end() || it->second.kind != Value::Kind::PairList)
            throw ParseError("config [netload]: steps kind needs levels = [[hour, gw], ...]");
        sc.net_load = piecewise_constant_load(sc.grid, it->second.pairs);
    } else if (kind == "inline") {
        const auto ts = nl->entries.find("t_hours");
        const auto vs = nl->entries.find("load_gw");
        if (ts == nl->entries.end() || vs == nl->entries.end() ||
            ts->second.kind != Value::Kind::NumberList || vs->second.kind != Value::Kind::NumberList)
            throw ParseError("config [netload]: inline kind needs t_hours and load_gw arrays");
        sc.net_load = resample_load(sc.grid, ts->second.numbers, vs->second.numbers);
    } else if (kind == "csv") {
        const std::string path = get_string(*nl, "path");
        if (!csv_loader) throw ParseError("config [netload]: csv kind needs a csv loader");
        sc.net_load = load_csv(sc.grid, csv_loader(path));
    } else if (kind == "constant") {
        const double level = get_number(*nl, "level_gw", 30.0);
        sc.net_load.values.assign(sc.grid.nodes(), level);
        sc.net_load.derivative.assign(sc.grid.nodes(), 0.0);
        sc.net_load.mean = level;
    } else {
        throw ParseError("config [netload]: unknown kind '" + kind + "'");
    }

    if (const Section* g = doc.find("generation")) {
        sc.generation.ramp_kappa = get_number(*g, "ramp_kappa", 1.0);
        sc.generation.cost_g = parse_cost(*g, 1.0, true, sc.net_load.mean);
    } else {
        sc.generation.cost_g = CostFunction::quadratic(1.0, sc.net_load.mean);
        sc.generation.ramp_kappa = 1.0;
    }

    for (const auto& s : doc.sections) {
        if (s.name != "[]class") continue;
        LoadClass c;
        c.name = get_string(s, "name");
        c.alpha = get_number(s, "alpha");
        c.capacity = get_number(s, "capacity");
        if (!(c.capacity > 0.0))
            throw ValidationError("class " + c.name + ": capacity must be > 0");
        c.cost = parse_cost(s, c.capacity, false, 0.0);
        sc.classes.push_back(std::move(c));
    }
    if (sc.classes.empty()) throw ParseError("config: at least one [[class]] section required");

    const std::size_t m = sc.classes.size();
    sc.x0.assign(m, 0.0);
    sc.z0.assign(m, 0.0);
    if (const Section* ini = doc.find("initial")) {
        auto read_vec = [&](const char* key, std::vector<double>& out) {
            const auto it = ini->entries.find(key);
            if (it == ini->entries.end()) return;
            if (it->second.kind != Value::Kind::NumberList)
                throw ParseError(std::string("config [initial]: ") + key + " must be an array");
            if (it->second.numbers.size() != m)
                throw ValidationError(std::string("config [initial]: ") + key +
                                      " length must match the number of classes");
            out = it->second.numbers;
        };
        read_vec("x0", sc.x0);
        read_vec("z0", sc.z0);
    }

    sc.validate();
    return sc;
}

/// Convenience: read a config file from disk, resolving csv paths relative to
/// the config file's directory.
inline Scenario load_scenario_file(const std::string& path, std::optional<int> steps_override = {}) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path();
    return load_scenario(
        ss.str(),
        [dir](const std::string& csv_path) {
            const auto resolved = std::filesystem::path(csv_path).is_absolute()
                                      ? std::filesystem::path(csv_path)
                                      : dir / csv_path;
            std::ifstream csv(resolved);
            if (!csv) throw ParseError("cannot open net-load csv '" + resolved.string() + "'");
            std::stringstream buf;
            buf << csv.rdbuf();
            return buf.str();
        },
        steps_override);
}

}  // namespace dispatch
