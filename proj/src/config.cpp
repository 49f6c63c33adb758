#include "stfe/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "stfe/io.hpp"

namespace stfe {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string_view::npos)
            return out;
        start = pos + 1;
    }
}

// Internal: a value that does not convert. The caller adds line and key.
struct BadValue {
    std::string message;
};

double to_real(std::string_view v)
{
    v = trim(v);
    // Multiples of pi: "pi", "2pi", "2*pi".
    if (v.size() >= 2 && v.substr(v.size() - 2) == "pi") {
        std::string_view f = trim(v.substr(0, v.size() - 2));
        if (!f.empty() && f.back() == '*')
            f = trim(f.substr(0, f.size() - 1));
        return (f.empty() ? 1.0 : to_real(f)) * std::numbers::pi;
    }
    double x = 0.0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc() || end != v.data() + v.size())
        throw BadValue{"expected a number, got '" + std::string(v) + "'"};
    return x;
}

double to_finite(std::string_view v)
{
    const double x = to_real(v);
    if (!std::isfinite(x))
        throw BadValue{"expected a finite number, got '" + std::string(trim(v)) + "'"};
    return x;
}

double to_nonnegative(std::string_view v)
{
    const double x = to_finite(v);
    if (x < 0.0)
        throw BadValue{"must be nonnegative, got " + std::string(trim(v))};
    return x;
}

double to_positive(std::string_view v)
{
    const double x = to_finite(v);
    if (!(x > 0.0))
        throw BadValue{"must be positive, got " + std::string(trim(v))};
    return x;
}

long long to_integer(std::string_view v)
{
    v = trim(v);
    long long x = 0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc() || end != v.data() + v.size())
        throw BadValue{"expected an integer, got '" + std::string(v) + "'"};
    return x;
}

std::uint64_t to_count(std::string_view v, long long minimum)
{
    const long long x = to_integer(v);
    if (x < minimum)
        throw BadValue{"must be an integer >= " + std::to_string(minimum) + ", got " + std::string(trim(v))};
    return static_cast<std::uint64_t>(x);
}

std::uint64_t to_u64(std::string_view v)
{
    v = trim(v);
    std::uint64_t x = 0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc() || end != v.data() + v.size())
        throw BadValue{"expected an unsigned 64-bit integer, got '" + std::string(v) + "'"};
    return x;
}

bool to_bool(std::string_view v)
{
    v = trim(v);
    if (v == "true" || v == "yes" || v == "on" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "off" || v == "0")
        return false;
    throw BadValue{"expected true or false, got '" + std::string(v) + "'"};
}

// "auto" maps to the library's automatic sentinel.
double to_auto_or(std::string_view v, double sentinel, double (*conv)(std::string_view))
{
    return trim(v) == "auto" ? sentinel : conv(v);
}

std::string auto_or(double x, bool is_auto)
{
    return is_auto ? "auto" : format_double(x);
}

std::string join_reals(const std::vector<double>& xs)
{
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i > 0)
            out += ", ";
        out += format_double(xs[i]);
    }
    return out;
}

template <class Fn>
auto converting(Fn&& fn)
{
    try {
        return fn();
    }
    catch (const ParameterError& e) {
        throw BadValue{e.what()};
    }
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters()
{
    static const std::map<std::string, Setter, std::less<>> table = {
        {"grid.L", [](RunConfig& c, std::string_view v) { c.L = to_positive(v); }},
        {"grid.M", [](RunConfig& c, std::string_view v) { c.M = to_count(v, 8); }},
        {"noise.lambda", [](RunConfig& c, std::string_view v) { c.lambda = converting([&] { return parse_lambda_spec(v); }); }},
        {"noise.normalize_zero_mode", [](RunConfig& c, std::string_view v) { c.normalize_zero_mode = to_bool(v); }},
        {"schedule.T", [](RunConfig& c, std::string_view v) { c.schedule.T = to_positive(v); }},
        {"schedule.N", [](RunConfig& c, std::string_view v) { c.schedule.N = to_count(v, 0); }},
        {"schedule.sample_times",
         [](RunConfig& c, std::string_view v) {
             c.schedule.sample_times.clear();
             if (!trim(v).empty())
                 for (std::string_view t : split(v, ','))
                     c.schedule.sample_times.push_back(to_nonnegative(t));
         }},
        {"schedule.seed", [](RunConfig& c, std::string_view v) { c.seed = to_u64(v); }},
        {"schedule.carry_det_step", [](RunConfig& c, std::string_view v) { c.schedule.carry_det_step = to_bool(v); }},
        {"det.eps_mob", [](RunConfig& c, std::string_view v) { c.schedule.det.eps_mob = to_nonnegative(v); }},
        {"det.dt_init", [](RunConfig& c, std::string_view v) { c.schedule.det.dt_init = to_auto_or(v, 0.0, to_positive); }},
        {"det.dt_min", [](RunConfig& c, std::string_view v) { c.schedule.det.dt_min = to_positive(v); }},
        {"det.dt_max", [](RunConfig& c, std::string_view v) { c.schedule.det.dt_max = to_auto_or(v, 0.0, to_positive); }},
        {"det.newton_tol", [](RunConfig& c, std::string_view v) { c.schedule.det.newton_tol = to_positive(v); }},
        {"det.newton_max_iter",
         [](RunConfig& c, std::string_view v) { c.schedule.det.newton_max_iter = static_cast<int>(to_count(v, 1)); }},
        {"det.neg_tol", [](RunConfig& c, std::string_view v) { c.schedule.det.neg_tol = to_auto_or(v, -1.0, to_nonnegative); }},
        {"det.mobility_mean",
         [](RunConfig& c, std::string_view v) {
             c.schedule.det.mobility_mean = converting([&] { return parse_mobility_mean(trim(v)); });
         }},
        {"sto.eps_visc", [](RunConfig& c, std::string_view v) { c.schedule.sto.eps_visc = to_nonnegative(v); }},
        {"sto.n_substeps",
         [](RunConfig& c, std::string_view v) {
             c.schedule.sto.n_substeps = trim(v) == "auto" ? 0 : to_count(v, 0);
         }},
        {"sto.implicit_drift", [](RunConfig& c, std::string_view v) { c.schedule.sto.implicit_drift = to_bool(v); }},
        {"sto.integrator",
         [](RunConfig& c, std::string_view v) {
             c.schedule.sto.integrator = converting([&] { return parse_integrator(trim(v)); });
         }},
        {"entropy.upper", [](RunConfig& c, std::string_view v) { c.entropy.upper = to_auto_or(v, 0.0, to_positive); }},
        {"entropy.eps", [](RunConfig& c, std::string_view v) { c.entropy.eps = to_nonnegative(v); }},
        {"ensemble.paths", [](RunConfig& c, std::string_view v) { c.n_paths = to_count(v, 1); }},
        {"ensemble.workers", [](RunConfig& c, std::string_view v) { c.workers = to_count(v, 1); }},
        {"ensemble.martingale_test", [](RunConfig& c, std::string_view v) { c.martingale_test = to_bool(v); }},
        {"diagnostics.test_functions",
         [](RunConfig& c, std::string_view v) { c.phis = converting([&] { return parse_test_functions(v); }); }},
        {"initial.kind",
         [](RunConfig& c, std::string_view v) {
             v = trim(v);
             if (v == "constant")
                 c.initial.kind = InitialKind::constant;
             else if (v == "sine")
                 c.initial.kind = InitialKind::sine;
             else if (v == "droplet")
                 c.initial.kind = InitialKind::droplet;
             else if (v == "csv")
                 c.initial.kind = InitialKind::csv;
             else
                 throw BadValue{"expected constant, sine, droplet or csv, got '" + std::string(v) + "'"};
         }},
        {"initial.c", [](RunConfig& c, std::string_view v) { c.initial.c = to_finite(v); }},
        {"initial.a", [](RunConfig& c, std::string_view v) { c.initial.a = to_finite(v); }},
        {"initial.m", [](RunConfig& c, std::string_view v) { c.initial.m = static_cast<int>(to_integer(v)); }},
        {"initial.h", [](RunConfig& c, std::string_view v) { c.initial.h = to_nonnegative(v); }},
        {"initial.b", [](RunConfig& c, std::string_view v) { c.initial.b = to_positive(v); }},
        {"initial.r", [](RunConfig& c, std::string_view v) { c.initial.r = to_positive(v); }},
        {"initial.file", [](RunConfig& c, std::string_view v) { c.initial.file = std::string(trim(v)); }},
        {"output.dir", [](RunConfig& c, std::string_view v) { c.out_dir = std::string(trim(v)); }},
        {"output.snapshots", [](RunConfig& c, std::string_view v) { c.write_snapshots = to_bool(v); }},
    };
    return table;
}

std::vector<double> default_sample_times(double T)
{
    return {0.0, 0.25 * T, 0.5 * T, 0.75 * T};
}

}  // namespace

NoiseModel LambdaSpec::model(double length, bool normalize_zero_mode) const
{
    if (is_list)
        return NoiseModel(length, values, normalize_zero_mode);
    return NoiseModel::power_law(length, lambda0, gamma, cutoff, normalize_zero_mode);
}

std::string LambdaSpec::to_string() const
{
    if (is_list)
        return "[" + join_reals(values) + "]";
    return "(lambda0=" + format_double(lambda0) + ", gamma=" + format_double(gamma) +
           ", K=" + std::to_string(cutoff) + ")";
}

LambdaSpec parse_lambda_spec(std::string_view text)
{
    text = trim(text);
    LambdaSpec spec;
    if (text.size() < 2)
        throw ParameterError("lambda spec must be '(lambda0=.., gamma=.., K=..)' or '[l_-K, .., l_K]'");
    const std::string_view body = trim(text.substr(1, text.size() - 2));
    try {
        if (text.front() == '[' && text.back() == ']') {
            spec.is_list = true;
            for (std::string_view v : split(body, ','))
                spec.values.push_back(to_real(v));
            if (spec.values.size() % 2 == 0)
                throw ParameterError("lambda list needs an odd number 2K+1 of amplitudes, got " +
                                     std::to_string(spec.values.size()));
            for (std::size_t i = 0; i < spec.values.size(); ++i)
                if (!(spec.values[i] >= 0.0) || !std::isfinite(spec.values[i]))
                    throw ParameterError("lambda_" + std::to_string(static_cast<long>(i) -
                                                                    static_cast<long>(spec.values.size() / 2)) +
                                         " must be finite and nonnegative");
            spec.cutoff = static_cast<int>(spec.values.size() / 2);
            return spec;
        }
        if (text.front() != '(' || text.back() != ')')
            throw ParameterError("lambda spec must be '(lambda0=.., gamma=.., K=..)' or '[l_-K, .., l_K]'");
        std::vector<std::string_view> seen;
        for (std::string_view item : split(body, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string_view::npos)
                throw ParameterError("lambda spec entry '" + std::string(item) + "' is not name=value");
            const std::string_view name = trim(item.substr(0, eq));
            const std::string_view value = item.substr(eq + 1);
            if (std::find(seen.begin(), seen.end(), name) != seen.end())
                throw ParameterError("lambda spec sets '" + std::string(name) + "' twice");
            seen.push_back(name);
            if (name == "lambda0")
                spec.lambda0 = to_real(value);
            else if (name == "gamma")
                spec.gamma = to_real(value);
            else if (name == "K")
                spec.cutoff = static_cast<int>(to_integer(value));
            else
                throw ParameterError("unknown lambda spec entry '" + std::string(name) + "'");
        }
    }
    catch (const BadValue& e) {
        throw ParameterError("lambda spec: " + e.message);
    }
    if (!(spec.lambda0 >= 0.0) || !std::isfinite(spec.lambda0))
        throw ParameterError("lambda0 must be finite and nonnegative");
    if (!std::isfinite(spec.gamma))
        throw ParameterError("gamma must be finite");
    if (spec.cutoff < 0)
        throw ParameterError("K must be nonnegative");
    return spec;
}

std::string_view to_string(InitialKind kind) noexcept
{
    switch (kind) {
    case InitialKind::constant: return "constant";
    case InitialKind::sine: return "sine";
    case InitialKind::droplet: return "droplet";
    case InitialKind::csv: return "csv";
    }
    return "sine";
}

GridFunction InitialCondition::sample(const Grid& grid) const
{
    const double L = grid.length();
    switch (kind) {
    case InitialKind::constant:
        return GridFunction(grid, c);
    case InitialKind::sine:
        return GridFunction::sample(grid, [&](double x) { return c + a * std::sin(2.0 * std::numbers::pi * m * x / L); });
    case InitialKind::droplet:
        return GridFunction::sample(grid, [&](double x) {
            const double s = (x - 0.5 * L) / r;
            return std::max(h, b * (1.0 - s * s));
        });
    case InitialKind::csv: {
        if (file.empty())
            throw ConfigError("initial condition 'csv' needs initial.file");
        const CsvTable t = read_csv(file);
        std::size_t col = 0;
        if (t.header.size() > 1) {
            const auto it = std::find(t.header.begin(), t.header.end(), "u");
            if (it == t.header.end())
                throw ConfigError(file + ": expected a column named 'u'");
            col = static_cast<std::size_t>(it - t.header.begin());
        }
        if (t.rows.size() != grid.size())
            throw ConfigError(file + ": " + std::to_string(t.rows.size()) + " rows for a grid of " +
                              std::to_string(grid.size()) + " nodes");
        const auto xcol = std::find(t.header.begin(), t.header.end(), "x");
        GridFunction u(grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (xcol != t.header.end()) {
                const double x = t.rows[i][static_cast<std::size_t>(xcol - t.header.begin())];
                if (!(std::abs(x - grid.node(i)) <= 1e-9 * L))
                    throw ConfigError(file + ": row " + std::to_string(i + 1) + " has x = " + format_double(x) +
                                      ", expected node " + format_double(grid.node(i)));
            }
            u[i] = t.rows[i][col];
        }
        if (!u.all_finite())
            throw ConfigError(file + ": non-finite initial value");
        return u;
    }
    }
    throw ConfigError("unknown initial condition kind");
}

EntropyParams RunConfig::entropy_params() const
{
    if (entropy.upper > 0.0)
        return entropy;
    return EntropyParams::for_initial(initial_state(), entropy.eps);
}

EnsembleConfig RunConfig::ensemble_config() const
{
    EnsembleConfig e;
    e.n_paths = n_paths;
    e.seed = seed;
    e.workers = workers;
    e.martingale_test = martingale_test;
    e.phis = phis;
    return e;
}

void RunConfig::validate() const
{
    try {
        const Grid g = grid();
        const NoiseModel model = noise();
        if (2 * static_cast<std::size_t>(model.cutoff()) + 1 > M / 2)
            throw ParameterError("K = " + std::to_string(model.cutoff()) + " is not resolved on M = " +
                                 std::to_string(M) + " nodes");
        schedule.validate();
        ensemble_config().validate();
        if (entropy.eps < 0.0 || entropy.upper < 0.0)
            throw ParameterError("entropy parameters must be nonnegative");
        if (phis.size() == 0)
            throw ParameterError("at least one test function is required");
        if (initial.kind != InitialKind::csv)
            require_admissible(initial.sample(g), schedule.det);
    }
    catch (const ParameterError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

RunConfig reference_config()
{
    RunConfig c;
    c.L = 2.0 * std::numbers::pi;
    c.M = 256;
    c.schedule.T = 0.1;
    c.schedule.N = 32;
    c.schedule.sample_times = default_sample_times(c.schedule.T);
    c.seed = 20240611;
    return c;
}

RunConfig parse_config(std::string_view text)
{
    RunConfig cfg;
    std::map<std::string, std::size_t, std::less<>> set_on;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        const std::string where = "line " + std::to_string(line_no);

        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(where + ": malformed section header '" + std::string(line) + "'");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            static const char* known[] = {"grid", "noise", "schedule", "det", "sto", "entropy",
                                          "ensemble", "diagnostics", "initial", "output"};
            if (std::find(std::begin(known), std::end(known), section) == std::end(known))
                throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(where + ": expected 'key = value', got '" + std::string(line) + "'");
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError(where + ": key '" + key + "' appears before any [section]");
        const std::string full = section + "." + key;
        const auto it = setters().find(full);
        if (it == setters().end())
            throw ConfigError(where + ": unknown key '" + key + "' in section [" + section + "]");
        if (const auto prev = set_on.find(full); prev != set_on.end())
            throw ConfigError(where + ": duplicate key '" + full + "' (first set on line " +
                              std::to_string(prev->second) + ")");
        set_on.emplace(full, line_no);
        try {
            it->second(cfg, value);
        }
        catch (const BadValue& e) {
            throw ConfigError(where + ": key '" + full + "': " + e.message);
        }
        if (nl == text.size())
            break;
    }

    for (const char* required : {"grid.L", "grid.M", "schedule.T", "schedule.N"})
        if (!set_on.contains(required))
            throw ConfigError(std::string("missing required key '") + required + "'");
    if (!set_on.contains("schedule.sample_times"))
        cfg.schedule.sample_times = default_sample_times(cfg.schedule.T);
    else {
        const std::string where = "line " + std::to_string(set_on.at("schedule.sample_times"));
        try {
            SplitSchedule s = cfg.schedule;
            s.validate();
        }
        catch (const ParameterError& e) {
            throw ConfigError(where + ": key 'schedule.sample_times': " + e.what());
        }
    }
    if (cfg.initial.kind == InitialKind::csv && cfg.initial.file.empty())
        throw ConfigError("initial.kind = csv requires initial.file");
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    RunConfig cfg = [&] {
        try {
            return parse_config(read_text(path));
        }
        catch (const ConfigError& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
    }();
    if (!cfg.initial.file.empty() && std::filesystem::path(cfg.initial.file).is_relative())
        cfg.initial.file = (path.parent_path() / cfg.initial.file).lexically_normal().string();
    return cfg;
}

std::string to_config_text(const RunConfig& c)
{
    const DetStepConfig& d = c.schedule.det;
    const StoStepConfig& s = c.schedule.sto;
    const auto b = [](bool x) { return x ? "true" : "false"; };
    std::ostringstream o;
    o << "[grid]\n"
      << "L = " << format_double(c.L) << "\n"
      << "M = " << c.M << "\n\n"
      << "[noise]\n"
      << "lambda = " << c.lambda.to_string() << "\n"
      << "normalize_zero_mode = " << b(c.normalize_zero_mode) << "\n\n"
      << "[schedule]\n"
      << "T = " << format_double(c.schedule.T) << "\n"
      << "N = " << c.schedule.N << "\n"
      << "sample_times = " << join_reals(c.schedule.sample_times) << "\n"
      << "seed = " << c.seed << "\n"
      << "carry_det_step = " << b(c.schedule.carry_det_step) << "\n\n"
      << "[det]\n"
      << "eps_mob = " << format_double(d.eps_mob) << "\n"
      << "dt_init = " << auto_or(d.dt_init, d.dt_init <= 0.0) << "\n"
      << "dt_min = " << format_double(d.dt_min) << "\n"
      << "dt_max = " << auto_or(d.dt_max, d.dt_max <= 0.0) << "\n"
      << "newton_tol = " << format_double(d.newton_tol) << "\n"
      << "newton_max_iter = " << d.newton_max_iter << "\n"
      << "neg_tol = " << auto_or(d.neg_tol, d.neg_tol < 0.0) << "\n"
      << "mobility_mean = " << to_string(d.mobility_mean) << "\n\n"
      << "[sto]\n"
      << "eps_visc = " << format_double(s.eps_visc) << "\n"
      << "n_substeps = " << (s.n_substeps == 0 ? std::string("auto") : std::to_string(s.n_substeps)) << "\n"
      << "implicit_drift = " << b(s.implicit_drift) << "\n"
      << "integrator = " << to_string(s.integrator) << "\n\n"
      << "[entropy]\n"
      << "upper = " << auto_or(c.entropy.upper, c.entropy.upper <= 0.0) << "\n"
      << "eps = " << format_double(c.entropy.eps) << "\n\n"
      << "[ensemble]\n"
      << "paths = " << c.n_paths << "\n"
      << "workers = " << c.workers << "\n"
      << "martingale_test = " << b(c.martingale_test) << "\n\n"
      << "[diagnostics]\n"
      << "test_functions = " << to_string(c.phis) << "\n\n"
      << "[initial]\n"
      << "kind = " << to_string(c.initial.kind) << "\n"
      << "c = " << format_double(c.initial.c) << "\n"
      << "a = " << format_double(c.initial.a) << "\n"
      << "m = " << c.initial.m << "\n"
      << "h = " << format_double(c.initial.h) << "\n"
      << "b = " << format_double(c.initial.b) << "\n"
      << "r = " << format_double(c.initial.r) << "\n";
    if (!c.initial.file.empty())
        o << "file = " << c.initial.file << "\n";
    o << "\n[output]\n"
      << "dir = " << c.out_dir << "\n"
      << "snapshots = " << b(c.write_snapshots) << "\n";
    return o.str();
}

TestFunctionSet parse_test_functions(std::string_view text)
{
    text = trim(text);
    if (text == "default")
        return TestFunctionSet::defaults();
    TestFunctionSet set;
    try {
        for (std::string_view fn : split(text, ';')) {
            TestFunction f;
            for (std::string_view term : split(fn, '+')) {
                const auto colon = term.find(':');
                if (colon == std::string_view::npos)
                    throw ParameterError("test function term '" + std::string(term) + "' is not mode:coefficient");
                const long long mode = to_integer(term.substr(0, colon));
                f.terms.emplace_back(static_cast<int>(mode), to_finite(term.substr(colon + 1)));
            }
            set.functions.push_back(std::move(f));
        }
    }
    catch (const BadValue& e) {
        throw ParameterError("test functions: " + e.message);
    }
    return set;
}

std::string to_string(const TestFunctionSet& phis)
{
    if (phis == TestFunctionSet::defaults())
        return "default";
    std::string out;
    for (std::size_t i = 0; i < phis.functions.size(); ++i) {
        if (i > 0)
            out += "; ";
        const auto& terms = phis.functions[i].terms;
        for (std::size_t j = 0; j < terms.size(); ++j) {
            if (j > 0)
                out += " + ";
            out += std::to_string(terms[j].first) + ":" + format_double(terms[j].second);
        }
    }
    return out;
}

}  // namespace stfe
