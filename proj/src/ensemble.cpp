#include "stfe/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

namespace stfe {

void EnsembleConfig::validate() const
{
    if (n_paths == 0)
        throw ParameterError("ensemble needs at least one path");
    if (workers == 0)
        throw ParameterError("ensemble needs at least one worker");
    if (!(max_failure_fraction >= 0.0 && max_failure_fraction < 1.0))
        throw ParameterError("failure fraction must lie in [0, 1)");
}

namespace {

template <class Get>
MomentStats moments(const std::vector<SplitPath>& paths, Get&& get)
{
    MomentStats m;
    const auto n = static_cast<double>(paths.size());
    // Centre on the first sample so that equal samples give exactly zero spread.
    const double x0 = get(paths.front());
    m.min = m.max = x0;
    double sum = 0.0;
    for (const SplitPath& p : paths) {
        const double v = get(p);
        sum += v - x0;
        m.min = std::min(m.min, v);
        m.max = std::max(m.max, v);
    }
    const double shift = sum / n;
    m.mean = x0 + shift;
    if (!std::isfinite(m.mean)) {
        m.variance = std::numeric_limits<double>::quiet_NaN();
    }
    else if (paths.size() > 1) {
        double ss = 0.0;
        for (const SplitPath& p : paths) {
            const double d = (get(p) - x0) - shift;
            ss += d * d;
        }
        m.variance = ss / (n - 1.0);
    }
    m.se = std::sqrt(m.variance / n);
    return m;
}

}  // namespace

EnsembleStats aggregate_paths(const std::vector<SplitPath>& paths)
{
    EnsembleStats stats;
    if (paths.empty())
        return stats;
    const SplitPath& first = paths.front();
    const std::size_t n_rows = first.series.rows.size();
    const std::size_t n_phi = first.series.n_test_functions;
    for (const SplitPath& p : paths) {
        if (p.series.rows.size() != n_rows)
            throw ParameterError("paths have different numbers of sample rows");
        for (std::size_t r = 0; r < n_rows; ++r)
            if (p.series.rows[r].time != first.series.rows[r].time)
                throw ParameterError("paths have different sample times");
    }
    stats.n_test_functions = n_phi;
    stats.min_value = first.min_value;
    for (const SplitPath& p : paths) {
        stats.min_value = std::min(stats.min_value, p.min_value);
        stats.max_mass_error = std::max(stats.max_mass_error, p.max_mass_error);
    }

    for (std::size_t r = 0; r < n_rows; ++r) {
        auto row_of = [r](const SplitPath& p) -> const DiagnosticsRow& { return p.series.rows[r]; };
        EnsembleRow row;
        row.time = first.series.rows[r].time;
        row.mass = moments(paths, [&](const SplitPath& p) { return row_of(p).mass; });
        row.energy = moments(paths, [&](const SplitPath& p) { return row_of(p).energy; });
        row.entropy_signed = moments(paths, [&](const SplitPath& p) { return row_of(p).entropy_signed; });
        row.entropy_abs = moments(paths, [&](const SplitPath& p) { return row_of(p).entropy_abs; });
        row.min_u = moments(paths, [&](const SplitPath& p) { return row_of(p).min_u; });
        row.dissipation = moments(paths, [&](const SplitPath& p) { return row_of(p).dissipation; });
        for (std::size_t k = 0; k < n_phi; ++k) {
            ResidualStats rs;
            rs.residual = moments(paths, [&](const SplitPath& p) { return row_of(p).residual[k]; });
            rs.qvar = moments(paths, [&](const SplitPath& p) { return row_of(p).qvar[k]; });
            rs.compensated = moments(paths, [&](const SplitPath& p) {
                const double m = row_of(p).residual[k];
                return m * m - row_of(p).qvar[k];
            });
            row.phi.push_back(rs);
        }
        stats.rows.push_back(std::move(row));
    }
    return stats;
}

EnsembleStats run_ensemble(const GridFunction& u0, const SplitSchedule& schedule, const NoiseModel& model,
                           const EnsembleConfig& cfg)
{
    cfg.validate();
    PathOptions opts;
    opts.phis = cfg.phis;
    opts.keep_snapshots = false;
    opts.keep_boundaries = false;
    const SplitRunner runner(u0.grid(), schedule, model, opts);
    const WienerIncrements increments(cfg.seed, model.cutoff(), runner.lattice(), cfg.n_paths);

    const std::uint64_t n = cfg.n_paths;
    std::vector<std::optional<SplitPath>> results(n);
    std::vector<std::string> errors(n);

    auto work = [&](std::size_t worker) {
        for (std::uint64_t p = worker; p < n; p += cfg.workers) {
            try {
                SplitPath path = runner.run(u0, increments, p);
                // Only the diagnostics are merged; drop the remaining states.
                path.det_end.clear();
                path.sto_end.clear();
                results[p] = std::move(path);
            }
            catch (const Error& e) {
                errors[p] = e.what();
            }
        }
    };

    const std::size_t workers = std::min<std::size_t>(cfg.workers, n);
    if (workers == 1) {
        work(0);
    }
    else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(work, w);
    }

    std::vector<SplitPath> ok;
    std::vector<PathFailure> failures;
    for (std::uint64_t p = 0; p < n; ++p) {
        if (results[p])
            ok.push_back(std::move(*results[p]));
        else
            failures.push_back({p, errors[p]});
    }

    if (static_cast<double>(failures.size()) > cfg.max_failure_fraction * static_cast<double>(n) || ok.empty()) {
        std::ostringstream msg;
        msg << failures.size() << " of " << n << " paths failed";
        for (const PathFailure& f : failures)
            msg << "\n  path " << f.path_id << ": " << f.message;
        throw EnsembleFailure(msg.str());
    }

    EnsembleStats stats = aggregate_paths(ok);
    stats.n_paths = n;
    stats.n_succeeded = ok.size();
    stats.seed = cfg.seed;
    stats.failures = std::move(failures);
    for (const GridFunction& phi : [&] {
             std::vector<GridFunction> s;
             for (const TestFunction& f : cfg.phis.functions)
                 s.push_back(f.sample(u0.grid()));
             return s;
         }())
        stats.phi_u0.push_back(inner_l2(u0, phi));
    if (cfg.martingale_test)
        stats.verdicts = martingale_test(stats);
    return stats;
}

std::vector<MartingaleVerdict> martingale_test(const EnsembleStats& stats)
{
    std::vector<MartingaleVerdict> out;
    for (std::size_t k = 0; k < stats.n_test_functions; ++k) {
        MartingaleVerdict v;
        v.phi = k;
        const double floor = 1e-8 * (1.0 + (k < stats.phi_u0.size() ? std::abs(stats.phi_u0[k]) : 0.0));
        double worst = -1.0;
        for (const EnsembleRow& row : stats.rows) {
            const ResidualStats& rs = row.phi[k];
            const double a = std::abs(rs.residual.mean) / (3.0 * rs.residual.se + floor);
            const double b = std::abs(rs.compensated.mean) / (5.0 * rs.compensated.se + floor);
            v.mean_score = std::max(v.mean_score, a);
            v.square_score = std::max(v.square_score, b);
            if (!(a <= 1.0 && b <= 1.0))
                v.pass = false;
            if (std::max(a, b) > worst) {
                worst = std::max(a, b);
                v.worst_time = row.time;
            }
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace stfe
