#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stfe/config.hpp"
#include "stfe/diagnostics.hpp"
#include "stfe/ensemble.hpp"
#include "stfe/splitter.hpp"

namespace stfe {

/// Shortest decimal that reads back to the same double; "inf", "-inf", "nan".
std::string format_double(double x);
/// Inverse of format_double; throws ConfigError on trailing garbage.
double parse_double(std::string_view text);

/// "time,mass,energy,entropy_signed,entropy_abs,min_u,resid_phi0,qvar_phi0,..."
std::string series_header(std::size_t n_test_functions);
std::string series_csv(const DiagnosticsSeries& series);

/// Every diagnostic of series_header except time, as X_mean,X_se.
std::string ensemble_header(std::size_t n_test_functions);
std::string ensemble_csv(const EnsembleStats& stats);

/// "x,u" with one row per node.
std::string snapshot_csv(const GridFunction& state);

/// One row per N: N, delta, then the root-mean-square difference to the next
/// N of the list (empty on the last row).
std::string refine_csv(const RefineTable& table, double T);
/// path_id,N,N_next,diff_final,diff_sample
std::string refine_paths_csv(const RefineTable& table);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;  // empty fields read as NaN
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
/// Creates parent directories; throws IoError naming the path.
void write_text(const std::filesystem::path& path, std::string_view text);

std::string sha256_hex(std::string_view data);

struct OutputFile {
    std::string name;  // relative to the output directory
    std::string sha256;
};

/// Collects the files of one run so that the manifest can list their digests.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

    const std::filesystem::path& dir() const noexcept { return dir_; }
    const std::vector<OutputFile>& files() const noexcept { return files_; }
    void write(const std::string& name, std::string_view text);

private:
    std::filesystem::path dir_;
    std::vector<OutputFile> files_;
};

/// Program version, resolved config, seed, increment scheme and output digests.
/// Contains nothing that varies between identical runs.
nlohmann::json make_manifest(std::string_view command, const RunConfig& cfg, const std::vector<OutputFile>& outputs,
                             nlohmann::json summary);

nlohmann::json to_json(const std::vector<MartingaleVerdict>& verdicts);

std::string_view version() noexcept;

}  // namespace stfe
