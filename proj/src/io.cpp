#include "stfe/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#ifndef STFE_VERSION
#define STFE_VERSION "0.0.0"
#endif

namespace stfe {

std::string format_double(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view text)
{
    double x = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty() && text.front() == '+')
        ++first;
    const auto [end, ec] = std::from_chars(first, last, x);
    if (text.empty() || ec != std::errc() || end != last)
        throw ConfigError("not a number: '" + std::string(text) + "'");
    return x;
}

namespace {

constexpr const char* kDiagnostics[] = {"mass", "energy", "entropy_signed", "entropy_abs", "min_u"};

void append(std::string& out, double x)
{
    out += ',';
    out += format_double(x);
}

void append_moments(std::string& out, const MomentStats& m)
{
    append(out, m.mean);
    append(out, m.se);
}

}  // namespace

std::string series_header(std::size_t n_test_functions)
{
    std::string h = "time";
    for (const char* d : kDiagnostics)
        h += std::string(",") + d;
    for (std::size_t k = 0; k < n_test_functions; ++k)
        h += ",resid_phi" + std::to_string(k) + ",qvar_phi" + std::to_string(k);
    return h;
}

std::string series_csv(const DiagnosticsSeries& series)
{
    std::string out = series_header(series.n_test_functions) + "\n";
    for (const DiagnosticsRow& r : series.rows) {
        out += format_double(r.time);
        for (double x : {r.mass, r.energy, r.entropy_signed, r.entropy_abs, r.min_u})
            append(out, x);
        for (std::size_t k = 0; k < series.n_test_functions; ++k) {
            append(out, r.residual[k]);
            append(out, r.qvar[k]);
        }
        out += '\n';
    }
    return out;
}

std::string ensemble_header(std::size_t n_test_functions)
{
    std::string h = "time";
    for (const char* d : kDiagnostics)
        h += std::string(",") + d + "_mean," + d + "_se";
    for (std::size_t k = 0; k < n_test_functions; ++k) {
        const std::string r = "resid_phi" + std::to_string(k);
        const std::string q = "qvar_phi" + std::to_string(k);
        h += "," + r + "_mean," + r + "_se," + q + "_mean," + q + "_se";
    }
    return h;
}

std::string ensemble_csv(const EnsembleStats& stats)
{
    std::string out = ensemble_header(stats.n_test_functions) + "\n";
    for (const EnsembleRow& r : stats.rows) {
        out += format_double(r.time);
        for (const MomentStats* m : {&r.mass, &r.energy, &r.entropy_signed, &r.entropy_abs, &r.min_u})
            append_moments(out, *m);
        for (const ResidualStats& p : r.phi) {
            append_moments(out, p.residual);
            append_moments(out, p.qvar);
        }
        out += '\n';
    }
    return out;
}

std::string snapshot_csv(const GridFunction& state)
{
    std::string out = "x,u\n";
    for (std::size_t i = 0; i < state.size(); ++i) {
        out += format_double(state.grid().node(i));
        append(out, state[i]);
        out += '\n';
    }
    return out;
}

std::string refine_csv(const RefineTable& table, double T)
{
    std::string out = "N,delta,rms_diff_final,rms_diff_sample\n";
    for (std::size_t i = 0; i < table.N_list.size(); ++i) {
        const std::size_t n = table.N_list[i];
        out += std::to_string(n);
        append(out, T / static_cast<double>(n + 1));
        if (i < table.rms_diff_final.size()) {
            append(out, table.rms_diff_final[i]);
            append(out, table.rms_diff_sample[i]);
        }
        else {
            out += ",,";
        }
        out += '\n';
    }
    return out;
}

std::string refine_paths_csv(const RefineTable& table)
{
    std::string out = "path_id,N,N_next,diff_final,diff_sample\n";
    for (const RefinePathRow& p : table.paths)
        for (std::size_t i = 0; i < p.diff_final.size(); ++i) {
            out += std::to_string(p.path_id) + "," + std::to_string(table.N_list[i]) + "," +
                   std::to_string(table.N_list[i + 1]);
            append(out, p.diff_final[i]);
            append(out, p.diff_sample[i]);
            out += '\n';
        }
    return out;
}

CsvTable parse_csv(std::string_view text)
{
    CsvTable t;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty())
            continue;
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string_view::npos)
                break;
            start = comma + 1;
        }
        if (t.header.empty()) {
            for (std::string_view f : fields)
                t.header.emplace_back(f);
            continue;
        }
        if (fields.size() != t.header.size())
            throw ConfigError("csv line " + std::to_string(line_no) + ": " + std::to_string(fields.size()) +
                              " fields, header has " + std::to_string(t.header.size()));
        std::vector<double> row;
        for (std::string_view f : fields) {
            try {
                row.push_back(f.empty() ? std::nan("") : parse_double(f));
            }
            catch (const ConfigError& e) {
                throw ConfigError("csv line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable read_csv(const std::filesystem::path& path)
{
    try {
        return parse_csv(read_text(path));
    }
    catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream s;
    s << in.rdbuf();
    if (in.bad())
        throw IoError("error while reading '" + path.string() + "'");
    return s.str();
}

void write_text(const std::filesystem::path& path, std::string_view text)
{
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec)
            throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (!out)
        throw IoError("error while writing '" + path.string() + "'");
}

std::string sha256_hex(std::string_view data)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

void OutputSet::write(const std::string& name, std::string_view text)
{
    write_text(dir_ / name, text);
    files_.push_back({name, sha256_hex(text)});
}

nlohmann::json to_json(const std::vector<MartingaleVerdict>& verdicts)
{
    nlohmann::json out = nlohmann::json::array();
    for (const MartingaleVerdict& v : verdicts)
        out.push_back({{"phi", v.phi},
                       {"pass", v.pass},
                       {"worst_time", v.worst_time},
                       {"mean_score", v.mean_score},
                       {"square_score", v.square_score}});
    return out;
}

nlohmann::json make_manifest(std::string_view command, const RunConfig& cfg, const std::vector<OutputFile>& outputs,
                             nlohmann::json summary)
{
    nlohmann::json files = nlohmann::json::array();
    for (const OutputFile& f : outputs)
        files.push_back({{"file", f.name}, {"sha256", f.sha256}});
    return {
        {"program", "stfe"},
        {"version", version()},
        {"command", command},
        {"seed", cfg.seed},
        {"increment_scheme", WienerIncrements::kSchemeId},
        {"config", to_config_text(cfg)},
        {"outputs", std::move(files)},
        {"summary", std::move(summary)},
    };
}

std::string_view version() noexcept
{
    return STFE_VERSION;
}

}  // namespace stfe
