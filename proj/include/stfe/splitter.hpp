#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "stfe/diagnostics.hpp"
#include "stfe/grid.hpp"
#include "stfe/noise.hpp"
#include "stfe/tfe_det.hpp"
#include "stfe/transport_sto.hpp"

namespace stfe {

/// Partition of [0, T) into N+1 intervals of length delta = T/(N+1); each
/// interval runs a deterministic substep followed by a stochastic one.
struct SplitSchedule {
    double T = 1.0;
    std::size_t N = 0;
    DetStepConfig det;
    StoStepConfig sto;
    std::vector<double> sample_times;  // strictly increasing, in [0, T)
    /// Start each deterministic substep with the step size the previous one
    /// ended on (only when det.dt_init is automatic).
    bool carry_det_step = true;

    double delta() const noexcept { return T / static_cast<double>(N + 1); }
    std::size_t intervals() const noexcept { return N + 1; }
    void validate() const;
};

enum class Segment { deterministic, stochastic };

/// Position on the concatenated clock: u_N(t) is v_N(internal_time) on the
/// deterministic half of interval j and w_N(internal_time) on the stochastic
/// half. internal_time lies in [(j-1) delta, j delta).
struct ClockPoint {
    Segment segment;
    std::size_t j;  // 1-based
    double internal_time;

    friend bool operator==(const ClockPoint&, const ClockPoint&) = default;
};

ClockPoint concat_clock(const SplitSchedule& schedule, double t);

/// Inverse of concat_clock.
double concat_time(const SplitSchedule& schedule, const ClockPoint& point);

/// Stochastic substeps per interval: sto.n_substeps, or the automatic rule for
/// a substep of length delta.
std::size_t substeps_per_interval(const SplitSchedule& schedule, const NoiseModel& model, const Grid& grid);

/// Lattice with one step per stochastic substep over [0, T).
StochasticLattice schedule_lattice(const SplitSchedule& schedule, const NoiseModel& model, const Grid& grid);

WienerIncrements sample_increments(const NoiseModel& model, const SplitSchedule& schedule, const Grid& grid,
                                   std::uint64_t seed, std::uint64_t n_paths);

struct PathSnapshot {
    double time;          // requested
    double snapped_time;  // of the recorded inner step, on the concatenated clock
    ClockPoint clock;
    GridFunction state;
};

struct PathOptions {
    TestFunctionSet phis = TestFunctionSet::defaults();
    bool keep_snapshots = true;
    bool keep_boundaries = true;
    /// Append a row for u_N(T-) after the requested sample times.
    bool record_final = true;
    /// Called with every accepted inner state, in order. The time is on the
    /// concatenated clock, where interval j covers [(j-1) delta, j delta) with
    /// its deterministic half first.
    std::function<void(Segment, double, const GridFunction&)> on_state;
};

/// One realisation of the splitting scheme.
///
/// Boundary states are shared between consecutive substeps: the buffer that
/// ends deterministic substep j is the one stochastic substep j starts from,
/// and likewise across intervals.
struct SplitPath {
    using State = std::shared_ptr<const GridFunction>;

    std::uint64_t path_id = 0;
    double delta = 0.0;
    std::size_t noise_modes = 0;
    TestFunctionSet phis;

    State initial;
    std::vector<State> det_end;  // v_N(j delta-), j = 1..N+1
    std::vector<State> sto_end;  // w_N(j delta-)

    std::vector<PathSnapshot> snapshots;
    DiagnosticsSeries series;
    std::vector<DetStepReport> det_reports;
    std::vector<StoStepReport> sto_reports;

    double min_value = 0.0;           // over all inner states
    double max_mass_error = 0.0;      // relative, over boundaries and sample rows
    double max_snap_distance = 0.0;

    std::size_t intervals() const noexcept { return det_end.size(); }
    /// Input of the deterministic substep of interval j (1-based).
    const State& det_start(std::size_t j) const;
    /// Input of the stochastic substep of interval j (1-based).
    const State& sto_start(std::size_t j) const;
    const GridFunction& final_state() const;
};

/// Assembled operators for one (grid, schedule, model); run() may be called
/// concurrently from several threads.
class SplitRunner {
public:
    SplitRunner(const Grid& grid, const SplitSchedule& schedule, const NoiseModel& model, PathOptions options = {});

    const SplitSchedule& schedule() const noexcept { return schedule_; }
    const NoiseModel& model() const noexcept { return model_; }
    const Grid& grid() const noexcept { return grid_; }
    const PathOptions& options() const noexcept { return options_; }
    std::size_t substeps() const noexcept { return n_sub_; }
    StochasticLattice lattice() const noexcept { return {schedule_.T, schedule_.intervals() * n_sub_}; }

    /// increments must cover [0, T) on this runner's lattice or a refinement of it.
    SplitPath run(const GridFunction& u0, const WienerIncrements& increments, std::uint64_t path_id) const;

private:
    Grid grid_;
    SplitSchedule schedule_;
    NoiseModel model_;
    PathOptions options_;
    std::size_t n_sub_;
    std::shared_ptr<const StochasticStepper> stepper_;
    std::vector<GridFunction> phi_;     // sampled test functions
    std::vector<GridFunction> dphi_c_;  // central difference, pairs with the noise term
    std::vector<GridFunction> dphi_f_;  // forward difference, pairs with the interface flux
};

/// Requires u0 > 0 when det.eps_mob = 0 and u0 >= 0 otherwise.
void require_admissible(const GridFunction& u0, const DetStepConfig& det);

SplitPath run_path(const GridFunction& u0, const SplitSchedule& schedule, const NoiseModel& model,
                   const WienerIncrements& increments, std::uint64_t path_id, const PathOptions& options = {});

struct RefinePathRow {
    std::uint64_t path_id;
    std::vector<double> diff_final;   // |u_{N_i}(T-) - u_{N_{i+1}}(T-)|_2
    std::vector<double> diff_sample;  // max over sample times
};

struct RefineTable {
    std::vector<std::size_t> N_list;
    std::uint64_t seed = 0;
    std::uint64_t fine_steps = 0;         // shared stochastic lattice over [0, T)
    std::vector<RefinePathRow> paths;
    std::vector<double> rms_diff_final;   // root mean square over paths
    std::vector<double> rms_diff_sample;

    /// Checks on the root-mean-square sequence.
    bool non_increasing() const;
    bool strictly_decreasing() const;
    /// Number of paths whose own final-time sequence strictly decreases.
    std::size_t paths_strictly_decreasing() const;
};

/// Coupled self-convergence study: every N in N_list (increasing) is driven by
/// the same Brownian path, sampled once on a lattice fine enough for all.
RefineTable refine_study(const GridFunction& u0, const NoiseModel& model, const SplitSchedule& base,
                         const std::vector<std::size_t>& N_list, std::uint64_t seed, std::uint64_t n_paths = 1);

}  // namespace stfe
