#include "stfe/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace stfe {

void SplitSchedule::validate() const
{
    if (!(T > 0.0) || !std::isfinite(T))
        throw ParameterError("horizon T must be positive");
    for (std::size_t i = 0; i < sample_times.size(); ++i) {
        const double t = sample_times[i];
        if (!(t >= 0.0 && t < T))
            throw ParameterError("sample time " + std::to_string(t) + " is outside [0, T)");
        if (i > 0 && !(t > sample_times[i - 1]))
            throw ParameterError("sample times must be strictly increasing");
    }
    det.validate();
    sto.validate();
}

ClockPoint concat_clock(const SplitSchedule& schedule, double t)
{
    if (!(t >= 0.0 && t < schedule.T))
        throw DomainError("time " + std::to_string(t) + " is outside [0, T)");
    const double delta = schedule.delta();
    const std::size_t last = schedule.intervals();
    auto j = static_cast<std::size_t>(std::floor(t / delta)) + 1;
    j = std::clamp<std::size_t>(j, 1, last);
    while (j > 1 && t < static_cast<double>(j - 1) * delta)
        --j;
    while (j < last && t >= static_cast<double>(j) * delta)
        ++j;
    const double jd = static_cast<double>(j);
    if (t < (jd - 0.5) * delta)
        return {Segment::deterministic, j, 2.0 * t - (jd - 1.0) * delta};
    return {Segment::stochastic, j, 2.0 * t - jd * delta};
}

double concat_time(const SplitSchedule& schedule, const ClockPoint& point)
{
    const double delta = schedule.delta();
    const double jd = static_cast<double>(point.j);
    return point.segment == Segment::deterministic ? 0.5 * (point.internal_time + (jd - 1.0) * delta)
                                                   : 0.5 * (point.internal_time + jd * delta);
}

std::size_t substeps_per_interval(const SplitSchedule& schedule, const NoiseModel& model, const Grid& grid)
{
    return schedule.sto.n_substeps > 0 ? schedule.sto.n_substeps : auto_substeps(schedule.delta(), model, grid);
}

StochasticLattice schedule_lattice(const SplitSchedule& schedule, const NoiseModel& model, const Grid& grid)
{
    return {schedule.T, schedule.intervals() * substeps_per_interval(schedule, model, grid)};
}

WienerIncrements sample_increments(const NoiseModel& model, const SplitSchedule& schedule, const Grid& grid,
                                   std::uint64_t seed, std::uint64_t n_paths)
{
    return WienerIncrements(seed, model.cutoff(), schedule_lattice(schedule, model, grid), n_paths);
}

const SplitPath::State& SplitPath::det_start(std::size_t j) const
{
    if (j == 0 || j > intervals())
        throw DomainError("interval index out of range");
    return j == 1 ? initial : sto_end[j - 2];
}

const SplitPath::State& SplitPath::sto_start(std::size_t j) const
{
    if (j == 0 || j > intervals())
        throw DomainError("interval index out of range");
    return det_end[j - 1];
}

const GridFunction& SplitPath::final_state() const
{
    if (sto_end.empty())
        throw DomainError("path has no recorded states");
    return *sto_end.back();
}

void require_admissible(const GridFunction& u0, const DetStepConfig& det)
{
    if (!u0.all_finite())
        throw ParameterError("initial data must be finite");
    for (std::size_t i = 0; i < u0.size(); ++i) {
        if (det.eps_mob == 0.0 && !(u0[i] > 0.0))
            throw ParameterError("initial data must be strictly positive when eps_mob = 0 (node " +
                                 std::to_string(i) + ")");
        if (u0[i] < 0.0)
            throw ParameterError("initial data must be nonnegative (node " + std::to_string(i) + ")");
    }
}

SplitRunner::SplitRunner(const Grid& grid, const SplitSchedule& schedule, const NoiseModel& model, PathOptions options)
    : grid_(grid), schedule_(schedule), model_(model), options_(std::move(options)),
      n_sub_(substeps_per_interval(schedule, model, grid))
{
    schedule_.validate();
    auto ops = std::make_shared<const NoiseOperators>(model_, grid_);
    stepper_ = std::make_shared<const StochasticStepper>(std::move(ops), schedule_.sto,
                                                         schedule_.delta() / static_cast<double>(n_sub_));
    for (const TestFunction& phi : options_.phis.functions) {
        phi_.push_back(phi.sample(grid_));
        dphi_c_.push_back(derivative(phi_.back(), 1));
        dphi_f_.push_back(forward_difference(phi_.back()));
    }
}

namespace {

struct Accumulators {
    std::vector<double> flux;   // sum dt (J, D+ phi)
    std::vector<double> drift;  // sum dt (drift, phi)
    std::vector<double> qvar;
    double dissipation = 0.0;
};

struct Request {
    std::size_t index;
    double time;
    ClockPoint clock;
    std::size_t segment;  // 2 (j-1) for deterministic, 2 (j-1) + 1 for stochastic
    double local;
};

struct Candidate {
    double local = 0.0;
    GridFunction state;
    Accumulators acc;
};

template <class E>
[[noreturn]] void rethrow_annotated(const E& e, const std::string& where)
{
    throw E(where + ": " + e.what());
}

template <class F>
auto annotate(const std::string& where, F&& body)
{
    try {
        return body();
    }
    catch (const SolverFailure& e) {
        throw SolverFailure(where + ": " + e.what(), e.residual());
    }
    catch (const StepFailure& e) {
        rethrow_annotated(e, where);
    }
    catch (const NumericalBlowup& e) {
        rethrow_annotated(e, where);
    }
    catch (const ParameterError& e) {
        rethrow_annotated(e, where);
    }
}

}  // namespace

SplitPath SplitRunner::run(const GridFunction& u0, const WienerIncrements& increments, std::uint64_t path_id) const
{
    if (!(u0.grid() == grid_))
        throw GridMismatch("initial data and runner use different grids");
    require_admissible(u0, schedule_.det);
    if (increments.cutoff() != model_.cutoff())
        throw ParameterError("increments were sampled for a different mode cutoff");
    if (path_id >= increments.n_paths())
        throw ParameterError("path id " + std::to_string(path_id) + " outside the sampled range");
    const StochasticLattice lat = lattice();
    const StochasticLattice& given = increments.lattice();
    if (std::abs(given.horizon - lat.horizon) > 1e-12 * lat.horizon || given.steps % lat.steps != 0)
        throw ParameterError("increment lattice (" + std::to_string(given.steps) +
                             " steps) does not refine the schedule lattice (" + std::to_string(lat.steps) + " steps)");
    const std::uint64_t factor = given.steps / lat.steps;

    const std::size_t n_phi = phi_.size();
    const double delta = schedule_.delta();
    const double mass0 = quadrature(u0);

    SplitPath path;
    path.path_id = path_id;
    path.delta = delta;
    path.noise_modes = model_.mode_count();
    path.phis = options_.phis;
    path.series.n_test_functions = n_phi;
    path.initial = std::make_shared<const GridFunction>(u0);
    path.min_value = u0.min();

    std::vector<double> phi_u0(n_phi);
    std::vector<bool> constant(n_phi);
    for (std::size_t p = 0; p < n_phi; ++p) {
        phi_u0[p] = inner_l2(u0, phi_[p]);
        constant[p] = options_.phis.functions[p].is_constant();
    }

    std::vector<Request> requests;
    for (std::size_t i = 0; i < schedule_.sample_times.size(); ++i) {
        const double t = schedule_.sample_times[i];
        const ClockPoint c = concat_clock(schedule_, t);
        const std::size_t seg = 2 * (c.j - 1) + (c.segment == Segment::stochastic ? 1 : 0);
        requests.push_back({i, t, c, seg, c.internal_time - static_cast<double>(c.j - 1) * delta});
    }
    std::size_t next_req = 0;

    Accumulators acc;
    acc.flux.assign(n_phi, 0.0);
    acc.drift.assign(n_phi, 0.0);
    acc.qvar.assign(n_phi, 0.0);

    auto mass_check = [&](const GridFunction& u) {
        path.max_mass_error = std::max(path.max_mass_error, std::abs(quadrature(u) - mass0) / std::abs(mass0));
    };

    auto make_row = [&](double time, double snapped, const GridFunction& u, const Accumulators& a) {
        DiagnosticsRow row;
        row.time = time;
        row.snapped_time = snapped;
        row.mass = quadrature(u);
        row.energy = surface_energy(u);
        row.entropy_signed = entropy_log_or_inf(u, true);
        row.entropy_abs = entropy_log_or_inf(u, false);
        row.min_u = u.min();
        row.dissipation = a.dissipation;
        row.residual.resize(n_phi);
        row.qvar.resize(n_phi);
        for (std::size_t p = 0; p < n_phi; ++p) {
            const double r = inner_l2(u, phi_[p]) - phi_u0[p];
            row.residual[p] = constant[p] ? r : r - a.flux[p] - a.drift[p];
            row.qvar[p] = a.qvar[p];
        }
        mass_check(u);
        return row;
    };

    std::size_t current_segment = 0;
    Candidate prev{0.0, u0, acc};
    auto pending_here = [&] { return next_req < requests.size() && requests[next_req].segment == current_segment; };

    auto emit = [&](const Request& r, double local, const GridFunction& u, const Accumulators& a) {
        ClockPoint c = r.clock;
        c.internal_time = static_cast<double>(c.j - 1) * delta + local;
        const double snapped = concat_time(schedule_, c);
        path.max_snap_distance = std::max(path.max_snap_distance, std::abs(snapped - r.time));
        path.series.rows.push_back(make_row(r.time, snapped, u, a));
        if (options_.keep_snapshots)
            path.snapshots.push_back({r.time, snapped, c, u});
    };

    // Called at every recorded state of the current segment, in time order.
    auto visit = [&](double local, const GridFunction& u) {
        while (pending_here() && requests[next_req].local <= local) {
            const Request& r = requests[next_req];
            if (local - r.local < r.local - prev.local)
                emit(r, local, u, acc);
            else
                emit(r, prev.local, prev.state, prev.acc);
            ++next_req;
        }
        if (pending_here())
            prev = Candidate{local, u, acc};
    };

    auto begin_segment = [&](std::size_t seg, const GridFunction& start) {
        current_segment = seg;
        prev = Candidate{0.0, start, acc};
        visit(0.0, start);
    };

    auto flush_segment = [&] {
        while (pending_here()) {
            emit(requests[next_req], prev.local, prev.state, prev.acc);
            ++next_req;
        }
    };

    const std::size_t modes = model_.mode_count();
    const int K = model_.cutoff();
    std::vector<double> db(n_sub_ * modes);
    double carried_dt = 0.0;

    SplitPath::State state = path.initial;
    for (std::size_t j = 1; j <= schedule_.intervals(); ++j) {
        const std::string tag = "interval " + std::to_string(j);
        const double start = static_cast<double>(j - 1) * delta;

        // Deterministic substep.
        begin_segment(2 * (j - 1), *state);
        DetStepConfig dcfg = schedule_.det;
        if (schedule_.carry_det_step && dcfg.dt_init <= 0.0 && carried_dt > 0.0)
            dcfg.dt_init = carried_dt;
        DetStepResult det = annotate(tag + ", deterministic substep", [&] {
            return det_step(*state, delta, dcfg, [&](const DetInnerStep& s) {
                const GridFunction flux = det_flux(s.state, dcfg);
                for (std::size_t p = 0; p < n_phi; ++p)
                    if (!constant[p])
                        acc.flux[p] += s.dt * inner_l2(flux, dphi_f_[p]);
                acc.dissipation += s.dt * dissipation_integrand(s.state, dcfg);
                path.min_value = std::min(path.min_value, s.state.min());
                if (options_.on_state)
                    options_.on_state(Segment::deterministic,
                                      concat_time(schedule_, {Segment::deterministic, j, start + s.t}), s.state);
                visit(s.t, s.state);
            });
        });
        flush_segment();
        carried_dt = det.report.next_dt;
        path.det_reports.push_back(det.report);
        auto v_end = std::make_shared<const GridFunction>(std::move(det.state));
        mass_check(*v_end);
        if (options_.keep_boundaries || j == schedule_.intervals())
            path.det_end.push_back(v_end);
        else
            path.det_end.push_back(nullptr);

        // Stochastic substep on the Brownian increments of [(j-1) delta, j delta).
        begin_segment(2 * (j - 1) + 1, *v_end);
        for (std::size_t s = 0; s < n_sub_; ++s)
            increments.fill_step(path_id, (j - 1) * n_sub_ + s, factor, std::span<double>(db).subspan(s * modes, modes));
        StoStepResult sto = annotate(tag + ", stochastic substep", [&] {
            return stepper_->run(*v_end, db, n_sub_, [&](const StoInnerStep& s) {
                const GridFunction drift = stepper_->drift_increment(s.before, s.after);
                for (std::size_t p = 0; p < n_phi; ++p) {
                    if (constant[p])
                        continue;
                    acc.drift[p] += inner_l2(drift, phi_[p]);
                    double q = 0.0;
                    for (int k = -K; k <= K; ++k) {
                        const double lam = model_.lambda(k);
                        if (lam == 0.0)
                            continue;
                        const GridFunction& psi = stepper_->operators().psi_nodes(k);
                        double ip = 0.0;
                        for (std::size_t i = 0; i < psi.size(); ++i)
                            ip += psi[i] * s.before[i] * dphi_c_[p][i];
                        ip *= grid_.dx();
                        q += lam * lam * ip * ip;
                    }
                    acc.qvar[p] += s.dt * q;
                }
                path.min_value = std::min(path.min_value, s.after.min());
                if (options_.on_state)
                    options_.on_state(Segment::stochastic,
                                      concat_time(schedule_, {Segment::stochastic, j, start + s.t}), s.after);
                visit(s.t, s.after);
            });
        });
        flush_segment();
        path.sto_reports.push_back(sto.report);
        auto w_end = std::make_shared<const GridFunction>(std::move(sto.state));
        mass_check(*w_end);
        path.sto_end.push_back(w_end);
        if (!options_.keep_boundaries && j > 1)
            path.sto_end[j - 2] = nullptr;
        state = w_end;
    }

    if (options_.record_final)
        path.series.rows.push_back(make_row(schedule_.T, schedule_.T, *state, acc));
    return path;
}

SplitPath run_path(const GridFunction& u0, const SplitSchedule& schedule, const NoiseModel& model,
                   const WienerIncrements& increments, std::uint64_t path_id, const PathOptions& options)
{
    return SplitRunner(u0.grid(), schedule, model, options).run(u0, increments, path_id);
}

bool RefineTable::non_increasing() const
{
    for (std::size_t i = 1; i < rms_diff_final.size(); ++i)
        if (rms_diff_final[i] > rms_diff_final[i - 1])
            return false;
    return true;
}

bool RefineTable::strictly_decreasing() const
{
    for (std::size_t i = 1; i < rms_diff_final.size(); ++i)
        if (!(rms_diff_final[i] < rms_diff_final[i - 1]))
            return false;
    return true;
}

std::size_t RefineTable::paths_strictly_decreasing() const
{
    std::size_t n = 0;
    for (const RefinePathRow& p : paths) {
        bool ok = true;
        for (std::size_t i = 1; i < p.diff_final.size(); ++i)
            ok = ok && p.diff_final[i] < p.diff_final[i - 1];
        n += ok ? 1 : 0;
    }
    return n;
}

RefineTable refine_study(const GridFunction& u0, const NoiseModel& model, const SplitSchedule& base,
                         const std::vector<std::size_t>& N_list, std::uint64_t seed, std::uint64_t n_paths)
{
    if (N_list.size() < 2)
        throw ParameterError("refinement study needs at least two values of N");
    for (std::size_t i = 1; i < N_list.size(); ++i)
        if (!(N_list[i] > N_list[i - 1]))
            throw ParameterError("N list must be strictly increasing");
    base.validate();

    // All schedules share one lattice: its step count is a multiple of every N+1
    // and fine enough for the substep rule of every N.
    std::uint64_t lcm = 1;
    for (std::size_t n : N_list) {
        lcm = std::lcm(lcm, static_cast<std::uint64_t>(n + 1));
        if (lcm > 100'000'000)
            throw ParameterError("N list has no common stochastic lattice of manageable size");
    }
    std::uint64_t q = 1;
    for (std::size_t n : N_list) {
        SplitSchedule s = base;
        s.N = n;
        const std::uint64_t need = substeps_per_interval(s, model, u0.grid());
        const std::uint64_t have = lcm / (n + 1);
        q = std::max(q, (need + have - 1) / have);
    }
    const std::uint64_t fine = lcm * q;
    const WienerIncrements increments(seed, model.cutoff(), {base.T, fine}, n_paths);

    RefineTable table;
    table.N_list = N_list;
    table.seed = seed;
    table.fine_steps = fine;
    PathOptions opts;
    opts.keep_boundaries = false;

    std::vector<SplitRunner> runners;
    for (std::size_t n : N_list) {
        SplitSchedule s = base;
        s.N = n;
        s.sto.n_substeps = static_cast<std::size_t>(fine / (n + 1));
        runners.emplace_back(u0.grid(), s, model, opts);
    }

    const std::size_t rows = N_list.size() - 1;
    table.rms_diff_final.assign(rows, 0.0);
    table.rms_diff_sample.assign(rows, 0.0);
    for (std::uint64_t p = 0; p < n_paths; ++p) {
        std::vector<SplitPath> runs;
        for (const SplitRunner& r : runners)
            runs.push_back(r.run(u0, increments, p));
        RefinePathRow row{p, {}, {}};
        for (std::size_t i = 0; i < rows; ++i) {
            row.diff_final.push_back(norm_l2(runs[i].final_state() - runs[i + 1].final_state()));
            double m = 0.0;
            for (std::size_t s = 0; s < runs[i].snapshots.size(); ++s)
                m = std::max(m, norm_l2(runs[i].snapshots[s].state - runs[i + 1].snapshots[s].state));
            row.diff_sample.push_back(m);
            table.rms_diff_final[i] += row.diff_final[i] * row.diff_final[i];
            table.rms_diff_sample[i] += m * m;
        }
        table.paths.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < rows; ++i) {
        table.rms_diff_final[i] = std::sqrt(table.rms_diff_final[i] / static_cast<double>(n_paths));
        table.rms_diff_sample[i] = std::sqrt(table.rms_diff_sample[i] / static_cast<double>(n_paths));
    }
    return table;
}

}  // namespace stfe
