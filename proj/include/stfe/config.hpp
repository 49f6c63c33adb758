#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "stfe/diagnostics.hpp"
#include "stfe/ensemble.hpp"
#include "stfe/noise.hpp"
#include "stfe/splitter.hpp"

namespace stfe {

/// Noise amplitudes, either the power law "(lambda0=.., gamma=.., K=..)" or an
/// explicit list "[l_-K, .., l_K]" of odd length.
struct LambdaSpec {
    bool is_list = false;
    double lambda0 = 0.5;
    double gamma = 2.0;
    int cutoff = 8;
    std::vector<double> values;

    NoiseModel model(double length, bool normalize_zero_mode) const;
    std::string to_string() const;

    friend bool operator==(const LambdaSpec&, const LambdaSpec&) = default;
};

LambdaSpec parse_lambda_spec(std::string_view text);

enum class InitialKind { constant, sine, droplet, csv };

std::string_view to_string(InitialKind kind) noexcept;

/// constant: c.  sine: c + a sin(2 pi m x / L).
/// droplet: max(h, b (1 - ((x - L/2) / r)^2)).  csv: nodal values from file.
struct InitialCondition {
    InitialKind kind = InitialKind::sine;
    double c = 1.0;
    double a = 0.5;
    int m = 1;
    double h = 0.01;
    double b = 1.0;
    double r = 1.0;
    std::string file;

    GridFunction sample(const Grid& grid) const;

    friend bool operator==(const InitialCondition&, const InitialCondition&) = default;
};

/// Everything needed to reproduce a run. Parsed from (and written to) an INI
/// style file:
///
///   [grid]      L, M
///   [noise]     lambda, normalize_zero_mode
///   [schedule]  T, N, sample_times, seed, carry_det_step
///   [det]       eps_mob, dt_init, dt_min, dt_max, newton_tol, newton_max_iter,
///               neg_tol, mobility_mean
///   [sto]       eps_visc, n_substeps, implicit_drift, integrator
///   [entropy]   upper (0 = 2 max u0 + 1), eps
///   [ensemble]  paths, workers, martingale_test
///   [diagnostics] test_functions ("m:c + m:c; ..." or "default")
///   [initial]   kind, c, a, m, h, b, r, file
///   [output]    dir, snapshots
///
/// L, M, T and N are required; everything else has a default.
struct RunConfig {
    double L = 0.0;
    std::size_t M = 0;
    LambdaSpec lambda;
    bool normalize_zero_mode = true;
    SplitSchedule schedule;
    std::uint64_t seed = 0;
    EntropyParams entropy{0.0, 0.0};
    std::uint64_t n_paths = 512;
    std::size_t workers = 1;
    bool martingale_test = true;
    TestFunctionSet phis = TestFunctionSet::defaults();
    InitialCondition initial;
    std::string out_dir = "out";
    bool write_snapshots = true;

    Grid grid() const { return Grid(L, M); }
    NoiseModel noise() const { return lambda.model(L, normalize_zero_mode); }
    GridFunction initial_state() const { return initial.sample(grid()); }
    /// entropy with upper resolved against the initial state.
    EntropyParams entropy_params() const;
    EnsembleConfig ensemble_config() const;
    void validate() const;
};

/// The reference desk-scale configuration: L = 2 pi, M = 256, T = 0.1,
/// N = 32, lambda (0.5, 2, 8), u0 = 1 + 0.5 sin(2 pi x / L).
RunConfig reference_config();

/// Throws ConfigError with "line n" and the key on any problem.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved text form; parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const RunConfig& cfg);

/// "m:c + m:c; m:c" with functions separated by ';'.
TestFunctionSet parse_test_functions(std::string_view text);
std::string to_string(const TestFunctionSet& phis);

}  // namespace stfe
