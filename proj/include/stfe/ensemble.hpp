#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stfe/splitter.hpp"

namespace stfe {

struct EnsembleConfig {
    std::uint64_t n_paths = 512;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    bool martingale_test = true;
    TestFunctionSet phis = TestFunctionSet::defaults();
    /// The run fails when more than this fraction of paths fail.
    double max_failure_fraction = 0.1;

    void validate() const;
};

struct MomentStats {
    double mean = 0.0;
    double variance = 0.0;  // unbiased; 0 for a single path
    double se = 0.0;        // sqrt(variance / n)
    double min = 0.0;
    double max = 0.0;
};

/// Statistics of M_phi at one sample time.
struct ResidualStats {
    MomentStats residual;        // M
    MomentStats qvar;            // <M>
    MomentStats compensated;     // M^2 - <M>
};

struct EnsembleRow {
    double time = 0.0;
    MomentStats mass;
    MomentStats energy;
    MomentStats entropy_signed;
    MomentStats entropy_abs;
    MomentStats min_u;
    MomentStats dissipation;
    std::vector<ResidualStats> phi;
};

struct PathFailure {
    std::uint64_t path_id;
    std::string message;
};

struct MartingaleVerdict {
    std::size_t phi = 0;
    bool pass = true;
    double worst_time = 0.0;   // sample time of the largest normalised deviation
    double mean_score = 0.0;   // max_t |mean M| / (3 SE + floor)
    double square_score = 0.0; // max_t |mean(M^2 - <M>)| / (5 SE + floor)
};

struct EnsembleStats {
    std::uint64_t n_paths = 0;
    std::uint64_t n_succeeded = 0;
    std::uint64_t seed = 0;
    std::size_t n_test_functions = 0;
    std::vector<EnsembleRow> rows;
    std::vector<PathFailure> failures;
    double min_value = 0.0;       // over all inner states of all paths
    double max_mass_error = 0.0;  // relative
    std::vector<double> phi_u0;   // (u0, phi), sets the test floor
    std::vector<MartingaleVerdict> verdicts;
};

/// Merge per-path series into statistics; the order of `paths` fixes the
/// summation order. All series must have the same sample times.
EnsembleStats aggregate_paths(const std::vector<SplitPath>& paths);

/// Run cfg.n_paths paths of the splitting scheme, path p driven by the
/// increments of (cfg.seed, p). Paths are statically partitioned over
/// cfg.workers threads and merged in path order, so the result does not
/// depend on the worker count.
///
/// Throws EnsembleFailure listing every failed path when more than
/// max_failure_fraction of the paths fail.
EnsembleStats run_ensemble(const GridFunction& u0, const SplitSchedule& schedule, const NoiseModel& model,
                           const EnsembleConfig& cfg);

/// For every phi: PASS iff at every sample time |mean M| <= 3 SE + floor and
/// |mean(M^2) - mean <M>| <= 5 SE(M^2 - <M>) + floor, where
/// floor = 1e-8 (1 + |(u0, phi)|) absorbs round-off when M has no randomness.
std::vector<MartingaleVerdict> martingale_test(const EnsembleStats& stats);

}  // namespace stfe
