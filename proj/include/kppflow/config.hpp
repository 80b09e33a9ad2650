#pragma once

// Key-value run configuration (INI syntax, parsed with Boost.PropertyTree).
//
//   [run]        mode = sweep|diffusivity|speed|classify|simulate|validate, output = DIR, jobs = N
//   [grid]       resolution = 64, resolution_3d = 32
//   [flow.ID]    kind = shear|cellular|checkerboard|gap|cellular3d|honeycomb|custom_stream|custom_velocity
//                resolution, periods, directions (per-flow override)
//                shear: sin = 1, cos =            checkerboard: exponent        gap: delta, exponent
//                cellular3d: phi = (amp,p1,t1,p2,t2) ..., w = 1, k = 2
//                custom_*: file = PATH (field container)
//   [sweep]      directions = (1,0) (0,1), amplitudes = 1, 10, 100, f_prime0 = 1,
//                classify = false, oracle = false
//   [tolerances] cell = 1e-10, eigen = 1e-8, lambda_rel = 1e-5, shift_factor = 1e-10
//   [classify]   amplitudes = 4, 16, 64, growth = 0.15, collapse = 100, grad_growth = 2, cutoffs = 2, 4, 8, 16
//   [simulate]   amplitudes = 0, 2, strip_periods = 32, t_end = 30, dt = 0, level = 0.5
//
// Lists are comma- or space-separated; vectors are parenthesized. Whole-line
// comments start with ';' or '#'.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kppflow/criterion.hpp"
#include "kppflow/field_io.hpp"
#include "kppflow/flows.hpp"
#include "kppflow/frontspeed.hpp"
#include "kppflow/homogenize.hpp"

namespace kppflow {

/// Config problem tied to a source line and key.
class ConfigError : public InputError {
 public:
    ConfigError(const std::string& source, int line, const std::string& key, const std::string& what)
        : InputError(source + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                     (key.empty() ? std::string() : ": key '" + key + "'") + ": " + what),
          line_(line),
          key_(key) {}
    int line() const { return line_; }
    const std::string& key() const { return key_; }

 private:
    int line_;
    std::string key_;
};

struct FlowConfig {
    std::string id;
    FlowSpec spec;
    int dim = 2;
    std::vector<int> resolution;
    std::vector<double> periods;
    std::vector<std::vector<double>> directions;

    TorusGrid grid() const { return TorusGrid(resolution, periods); }
    FlowField build() const { return build_flow(spec, grid(), id); }
};

struct SweepConfig {
    std::string source = "<config>";
    std::string mode = "sweep";
    std::string output = "kppflow-out";
    int jobs = 0;
    std::vector<FlowConfig> flows;
    std::vector<double> amplitudes{0.0};
    std::vector<double> f_prime0{1.0};
    bool classify = false;
    bool oracle = false;
    CellOptions cell;
    SpeedOptions speed;
    CriterionOptions criterion;
    std::vector<double> classify_amplitudes{4.0, 16.0, 64.0};
    ClassifyThresholds thresholds;
    std::vector<double> simulate_amplitudes;
    int strip_periods = 32;
    double t_end = 30.0;
    double dt = 0.0;
    double level = 0.5;
};

/// Default worker count: KPPFLOW_JOBS when set, else the hardware thread count.
inline int default_jobs() {
    if (const char* env = std::getenv("KPPFLOW_JOBS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<int>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

/// Line numbers of "section.key" (and "[section]") entries.
inline std::map<std::string, int> ini_line_index(std::istream& is) {
    std::map<std::string, int> idx;
    std::string line, section;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == ';' || line[b] == '#')
            continue;
        if (line[b] == '[') {
            const auto e = line.find(']', b);
            section = line.substr(b + 1, e == std::string::npos ? std::string::npos : e - b - 1);
            idx.emplace("[" + section + "]", n);
            continue;
        }
        const auto eq = line.find('=', b);
        if (eq == std::string::npos)
            continue;
        std::string key = line.substr(b, eq - b);
        key.erase(key.find_last_not_of(" \t") + 1);
        idx.emplace(section + "." + key, n);
    }
    return idx;
}

class ConfigReader {
 public:
    ConfigReader(std::string source, std::map<std::string, int> lines)
        : source_(std::move(source)), lines_(std::move(lines)) {}

    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) const {
        const std::string full = key.empty() ? "[" + section + "]" : section + "." + key;
        const auto it = lines_.find(key.empty() ? full : section + "." + key);
        throw ConfigError(source_, it == lines_.end() ? 0 : it->second, full, what);
    }

    void check_keys(const std::string& section, const boost::property_tree::ptree& t,
                    const std::set<std::string>& allowed) const {
        for (const auto& [k, v] : t) {
            if (!v.empty())
                fail(section, k, "nested values are not supported");
            if (!allowed.count(k))
                fail(section, k, "unknown key in [" + section + "]");
        }
    }

    double number(const std::string& section, const std::string& key, const std::string& text) const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(text, &pos);
            if (pos != text.size() || !std::isfinite(v))
                throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            fail(section, key, "expected a number, got '" + text + "'");
        }
    }

    std::vector<double> numbers(const std::string& section, const std::string& key, const std::string& text) const {
        std::string s = text;
        std::replace(s.begin(), s.end(), ',', ' ');
        std::istringstream is(s);
        std::vector<double> out;
        std::string tok;
        while (is >> tok)
            out.push_back(number(section, key, tok));
        return out;
    }

    std::vector<int> integers(const std::string& section, const std::string& key, const std::string& text) const {
        std::vector<int> out;
        for (double v : numbers(section, key, text)) {
            if (v != std::floor(v) || std::abs(v) > 1e9)
                fail(section, key, "expected integers");
            out.push_back(static_cast<int>(v));
        }
        return out;
    }

    bool boolean(const std::string& section, const std::string& key, std::string text) const {
        std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
        if (text == "true" || text == "yes" || text == "1" || text == "on")
            return true;
        if (text == "false" || text == "no" || text == "0" || text == "off")
            return false;
        fail(section, key, "expected true or false, got '" + text + "'");
    }

    /// "(a,b) (c,d)" -> {{a,b},{c,d}}
    std::vector<std::vector<double>> vectors(const std::string& section, const std::string& key,
                                             const std::string& text) const {
        std::vector<std::vector<double>> out;
        std::size_t p = 0;
        while (true) {
            p = text.find_first_not_of(" \t", p);
            if (p == std::string::npos)
                break;
            if (text[p] != '(')
                fail(section, key, "expected parenthesized vectors such as (1,0) (0,1)");
            const auto q = text.find(')', p);
            if (q == std::string::npos)
                fail(section, key, "unbalanced parenthesis");
            out.push_back(numbers(section, key, text.substr(p + 1, q - p - 1)));
            p = q + 1;
        }
        if (out.empty())
            fail(section, key, "no vectors given");
        return out;
    }

    const std::string& source() const { return source_; }

 private:
    std::string source_;
    std::map<std::string, int> lines_;
};

inline std::optional<std::string> value_of(const boost::property_tree::ptree& t, const std::string& key) {
    const auto it = t.find(key);
    if (it == t.not_found())
        return std::nullopt;
    return it->second.data();
}

inline FlowConfig parse_flow(const ConfigReader& rd, const std::string& section, const std::string& id,
                             const boost::property_tree::ptree& t, int res2, int res3) {
    static const std::set<std::string> keys{"kind", "resolution", "periods", "directions", "sin", "cos",
                                            "exponent", "delta", "phi", "w", "k", "file", "dim"};
    rd.check_keys(section, t, keys);
    const auto kind = value_of(t, "kind");
    if (!kind)
        rd.fail(section, "", "flow section needs a 'kind'");
    FlowConfig fc;
    fc.id = id;
    auto num = [&](const std::string& k, double dflt) {
        const auto v = value_of(t, k);
        return v ? rd.number(section, k, *v) : dflt;
    };
    auto reject = [&](std::initializer_list<const char*> ks) {
        for (const char* k : ks)
            if (value_of(t, k))
                rd.fail(section, k, "not used by flow kind '" + *kind + "'");
    };
    if (*kind == "shear") {
        flows::Shear s;
        if (const auto v = value_of(t, "sin"))
            s.sin_coef = rd.numbers(section, "sin", *v);
        if (const auto v = value_of(t, "cos"))
            s.cos_coef = rd.numbers(section, "cos", *v);
        reject({"exponent", "delta", "phi", "w", "k", "file"});
        fc.spec = s;
    } else if (*kind == "cellular") {
        reject({"sin", "cos", "exponent", "delta", "phi", "w", "k", "file"});
        fc.spec = flows::Cellular2D{};
    } else if (*kind == "checkerboard") {
        reject({"sin", "cos", "delta", "phi", "w", "k", "file"});
        fc.spec = flows::Checkerboard{num("exponent", 2.0)};
    } else if (*kind == "gap") {
        reject({"sin", "cos", "phi", "w", "k", "file"});
        fc.spec = flows::GapFlow{num("delta", 0.25), num("exponent", 2.0)};
    } else if (*kind == "cellular3d") {
        reject({"sin", "cos", "exponent", "delta", "file"});
        flows::Cellular3D c;
        if (const auto v = value_of(t, "phi")) {
            c.phi.clear();
            for (const auto& p : rd.vectors(section, "phi", *v)) {
                if (p.size() != 5)
                    rd.fail(section, "phi", "each term needs five numbers (amp,p1,t1,p2,t2)");
                c.phi.push_back({p[0], p[1], p[2], p[3], p[4]});
            }
        }
        if (const auto v = value_of(t, "w"))
            c.w_sine = rd.numbers(section, "w", *v);
        c.k = num("k", 2.0);
        fc.spec = c;
    } else if (*kind == "honeycomb") {
        reject({"sin", "cos", "exponent", "delta", "phi", "w", "k", "file"});
        fc.spec = flows::Honeycomb3D{};
    } else if (*kind == "custom_stream" || *kind == "custom_velocity") {
        reject({"sin", "cos", "exponent", "delta", "phi", "w", "k", "resolution", "periods"});
        const auto f = value_of(t, "file");
        if (!f)
            rd.fail(section, "", "custom flows need a 'file'");
        try {
            if (*kind == "custom_stream")
                fc.spec = flows::CustomStream{read_scalar_field(*f)};
            else
                fc.spec = flows::CustomVelocity{read_vector_field(*f)};
        } catch (const std::exception& e) {
            rd.fail(section, "file", e.what());
        }
    } else {
        rd.fail(section, "kind", "unknown flow kind '" + *kind + "'");
    }

    const int native = flow_native_dim(fc.spec);
    fc.dim = native == 0 ? 2 : native;
    if (const auto v = value_of(t, "dim")) {
        const auto d = rd.integers(section, "dim", *v);
        if (d.size() != 1 || (d[0] != 2 && d[0] != 3))
            rd.fail(section, "dim", "dimension must be 2 or 3");
        if (native != 0 && d[0] != native)
            rd.fail(section, "dim", "flow kind '" + *kind + "' is " + std::to_string(native) + "-dimensional");
        fc.dim = d[0];
    }
    if (std::holds_alternative<flows::CustomStream>(fc.spec)) {
        fc.resolution = std::get<flows::CustomStream>(fc.spec).H.grid().resolution();
    } else if (std::holds_alternative<flows::CustomVelocity>(fc.spec)) {
        fc.resolution = std::get<flows::CustomVelocity>(fc.spec).u.grid().resolution();
    } else {
        fc.resolution.assign(fc.dim, fc.dim == 3 ? res3 : res2);
        if (const auto v = value_of(t, "resolution")) {
            auto r = rd.integers(section, "resolution", *v);
            if (r.size() == 1)
                r.assign(fc.dim, r[0]);
            if (static_cast<int>(r.size()) != fc.dim)
                rd.fail(section, "resolution", "give one value or one per axis");
            fc.resolution = r;
        }
    }
    fc.periods = natural_periods(fc.spec, fc.dim);
    if (const auto v = value_of(t, "periods")) {
        auto p = rd.numbers(section, "periods", *v);
        if (static_cast<int>(p.size()) != fc.dim)
            rd.fail(section, "periods", "give one period per axis");
        fc.periods = p;
    }
    try {
        (void)TorusGrid(fc.resolution, fc.periods);
    } catch (const InputError& e) {
        rd.fail(section, value_of(t, "resolution") ? "resolution" : "", e.what());
    }
    if (const auto v = value_of(t, "directions"))
        fc.directions = rd.vectors(section, "directions", *v);
    return fc;
}

}  // namespace detail

/// Parse and schema-check a configuration from a stream. Directions from [sweep]
/// apply to every flow of matching dimension unless the flow lists its own.
inline SweepConfig parse_config(std::istream& in, const std::string& source = "<config>") {
    namespace pt = boost::property_tree;
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    std::istringstream lines_in(text);
    detail::ConfigReader rd(source, detail::ini_line_index(lines_in));
    pt::ptree root;
    try {
        std::istringstream is(text);
        pt::read_ini(is, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source, static_cast<int>(e.line()), "", e.message());
    }

    SweepConfig c;
    c.source = source;
    int res2 = 64, res3 = 32;
    std::vector<std::vector<double>> directions;
    std::vector<std::pair<std::string, const pt::ptree*>> flow_sections;
    for (const auto& [name, t] : root) {
        if (t.empty() && !t.data().empty())
            rd.fail("", name, "keys must live inside a [section]");
        auto get = [&](const std::string& k) { return detail::value_of(t, k); };
        if (name == "run") {
            rd.check_keys(name, t, {"mode", "output", "jobs"});
            if (const auto v = get("mode")) {
                static const std::set<std::string> modes{"sweep", "diffusivity", "speed",
                                                         "classify", "simulate", "validate"};
                if (!modes.count(*v))
                    rd.fail(name, "mode", "unknown mode '" + *v + "'");
                c.mode = *v;
            }
            if (const auto v = get("output"))
                c.output = *v;
            if (const auto v = get("jobs")) {
                const auto j = rd.integers(name, "jobs", *v);
                if (j.size() != 1 || j[0] < 0)
                    rd.fail(name, "jobs", "expected a nonnegative integer");
                c.jobs = j[0];
            }
        } else if (name == "grid") {
            rd.check_keys(name, t, {"resolution", "resolution_3d"});
            auto one = [&](const std::string& k, int& out) {
                if (const auto v = get(k)) {
                    const auto r = rd.integers(name, k, *v);
                    if (r.size() != 1)
                        rd.fail(name, k, "expected one integer");
                    out = r[0];
                }
            };
            one("resolution", res2);
            one("resolution_3d", res3);
        } else if (name.rfind("flow.", 0) == 0) {
            if (name.size() == 5)
                rd.fail(name, "", "flow sections are named [flow.ID]");
            flow_sections.emplace_back(name, &t);
        } else if (name == "sweep") {
            rd.check_keys(name, t, {"directions", "amplitudes", "f_prime0", "classify", "oracle"});
            if (const auto v = get("directions"))
                directions = rd.vectors(name, "directions", *v);
            if (const auto v = get("amplitudes"))
                c.amplitudes = rd.numbers(name, "amplitudes", *v);
            if (const auto v = get("f_prime0"))
                c.f_prime0 = rd.numbers(name, "f_prime0", *v);
            if (const auto v = get("classify"))
                c.classify = rd.boolean(name, "classify", *v);
            if (const auto v = get("oracle"))
                c.oracle = rd.boolean(name, "oracle", *v);
            for (double A : c.amplitudes)
                if (A < 0.0)
                    rd.fail(name, "amplitudes", "amplitudes must be nonnegative");
            if (c.amplitudes.empty())
                rd.fail(name, "amplitudes", "at least one amplitude is required");
            for (double f : c.f_prime0)
                if (!(f > 0.0))
                    rd.fail(name, "f_prime0", "f'(0) values must be positive");
            if (c.f_prime0.empty())
                rd.fail(name, "f_prime0", "at least one value is required");
        } else if (name == "tolerances") {
            rd.check_keys(name, t, {"cell", "eigen", "lambda_rel", "shift_factor"});
            if (const auto v = get("cell")) {
                c.cell.tol = rd.number(name, "cell", *v);
                if (c.cell.tol < 1e-12 || c.cell.tol > 1e-4)
                    rd.fail(name, "cell", "must lie in [1e-12, 1e-4]");
            }
            if (const auto v = get("eigen")) {
                c.speed.eigen.tol = rd.number(name, "eigen", *v);
                if (!(c.speed.eigen.tol > 0.0))
                    rd.fail(name, "eigen", "must be positive");
            }
            if (const auto v = get("lambda_rel")) {
                c.speed.lambda_rel_tol = rd.number(name, "lambda_rel", *v);
                if (!(c.speed.lambda_rel_tol > 0.0))
                    rd.fail(name, "lambda_rel", "must be positive");
            }
            if (const auto v = get("shift_factor")) {
                c.criterion.shift_factor = rd.number(name, "shift_factor", *v);
                if (!(c.criterion.shift_factor >= 0.0))
                    rd.fail(name, "shift_factor", "must be nonnegative");
            }
        } else if (name == "classify") {
            rd.check_keys(name, t, {"amplitudes", "growth", "collapse", "grad_growth", "cutoffs"});
            if (const auto v = get("amplitudes"))
                c.classify_amplitudes = rd.numbers(name, "amplitudes", *v);
            if (c.classify_amplitudes.size() < 3)
                rd.fail(name, "amplitudes", "at least three amplitudes are required");
            for (std::size_t i = 0; i < c.classify_amplitudes.size(); ++i)
                if (!(c.classify_amplitudes[i] > 0.0) ||
                    (i > 0 && c.classify_amplitudes[i] <= c.classify_amplitudes[i - 1]))
                    rd.fail(name, "amplitudes", "amplitudes must be positive and increasing");
            if (const auto v = get("growth"))
                c.thresholds.growth = rd.number(name, "growth", *v);
            if (const auto v = get("collapse"))
                c.thresholds.collapse_factor = rd.number(name, "collapse", *v);
            if (const auto v = get("grad_growth"))
                c.thresholds.grad_growth = rd.number(name, "grad_growth", *v);
            if (const auto v = get("cutoffs"))
                c.thresholds.cutoffs = rd.integers(name, "cutoffs", *v);
        } else if (name == "simulate") {
            rd.check_keys(name, t, {"amplitudes", "strip_periods", "t_end", "dt", "level"});
            if (const auto v = get("amplitudes"))
                c.simulate_amplitudes = rd.numbers(name, "amplitudes", *v);
            if (const auto v = get("strip_periods")) {
                const auto p = rd.integers(name, "strip_periods", *v);
                if (p.size() != 1 || p[0] < 4)
                    rd.fail(name, "strip_periods", "expected one integer >= 4");
                c.strip_periods = p[0];
            }
            if (const auto v = get("t_end")) {
                c.t_end = rd.number(name, "t_end", *v);
                if (!(c.t_end > 0.0))
                    rd.fail(name, "t_end", "must be positive");
            }
            if (const auto v = get("dt"))
                c.dt = rd.number(name, "dt", *v);
            if (const auto v = get("level")) {
                c.level = rd.number(name, "level", *v);
                if (!(c.level > 0.0 && c.level < 1.0))
                    rd.fail(name, "level", "must lie in (0,1)");
            }
        } else {
            rd.fail(name, "", "unknown section");
        }
    }

    std::set<std::string> ids;
    for (const auto& [name, t] : flow_sections) {
        const std::string id = name.substr(5);
        if (!ids.insert(id).second)
            rd.fail(name, "", "duplicate flow id '" + id + "'");
        FlowConfig fc = detail::parse_flow(rd, name, id, *t, res2, res3);
        if (fc.directions.empty())
            for (const auto& e : directions)
                if (static_cast<int>(e.size()) == fc.dim)
                    fc.directions.push_back(e);
        if (fc.directions.empty())
            {
            std::vector<double> e1(fc.dim, 0.0);
            e1[0] = 1.0;
            fc.directions.push_back(e1);
        }
        for (const auto& e : fc.directions) {
            if (static_cast<int>(e.size()) != fc.dim)
                rd.fail(name, "directions", "direction has the wrong dimension");
            double n = 0.0;
            for (double x : e)
                n += x * x;
            if (!(n > 0.0))
                rd.fail(name, "directions", "directions must be nonzero");
        }
        c.flows.push_back(std::move(fc));
    }
    if (c.flows.empty())
        throw ConfigError(source, 0, "", "no [flow.ID] section");
    if (c.simulate_amplitudes.empty())
        c.simulate_amplitudes = c.amplitudes;
    return c;
}

inline SweepConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw InputError("cannot open config file '" + path + "'");
    return parse_config(is, path);
}

}  // namespace kppflow
