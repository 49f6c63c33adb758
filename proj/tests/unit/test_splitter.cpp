#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "stfe/splitter.hpp"

using namespace stfe;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

GridFunction wavy(const Grid& g)
{
    return GridFunction::sample(g, [&](double x) { return 1.0 + 0.5 * std::sin(kTwoPi * x / g.length()); });
}

SplitSchedule schedule(double T, std::size_t N)
{
    SplitSchedule s;
    s.T = T;
    s.N = N;
    return s;
}

}  // namespace

TEST(ConcatClock, InteriorOfDeterministicHalf)
{
    const ClockPoint c = concat_clock(schedule(1.0, 3), 0.30);
    EXPECT_EQ(c.segment, Segment::deterministic);
    EXPECT_EQ(c.j, 2u);
    EXPECT_NEAR(c.internal_time, 0.35, 1e-15);
}

TEST(ConcatClock, Origin)
{
    EXPECT_EQ(concat_clock(schedule(1.0, 3), 0.0), (ClockPoint{Segment::deterministic, 1, 0.0}));
}

TEST(ConcatClock, MidpointOpensStochasticHalf)
{
    const SplitSchedule s = schedule(1.0, 3);
    for (std::size_t j = 1; j <= 4; ++j) {
        const ClockPoint c = concat_clock(s, (static_cast<double>(j) - 0.5) * 0.25);
        EXPECT_EQ(c.segment, Segment::stochastic);
        EXPECT_EQ(c.j, j);
        EXPECT_NEAR(c.internal_time, (static_cast<double>(j) - 1.0) * 0.25, 1e-15);
    }
}

TEST(ConcatClock, OutOfRange)
{
    const SplitSchedule s = schedule(1.0, 3);
    EXPECT_THROW(concat_clock(s, -1e-300), DomainError);
    EXPECT_THROW(concat_clock(s, 1.0), DomainError);
    EXPECT_THROW(concat_clock(s, std::nan("")), DomainError);
}

TEST(ConcatClock, RoundTrip)
{
    std::mt19937_64 rng(5);
    for (double T : {1.0, 0.1, 3.7})
        for (std::size_t N : {0u, 1u, 3u, 32u, 99u}) {
            const SplitSchedule s = schedule(T, N);
            const double delta = s.delta();
            std::uniform_real_distribution<double> u(0.0, T);
            for (int i = 0; i < 2000; ++i) {
                const double t = u(rng);
                const ClockPoint c = concat_clock(s, t);
                ASSERT_GE(c.j, 1u);
                ASSERT_LE(c.j, N + 1);
                ASSERT_GE(c.internal_time, (static_cast<double>(c.j) - 1.0) * delta - 1e-15 * T);
                ASSERT_LT(c.internal_time, static_cast<double>(c.j) * delta + 1e-15 * T);
                ASSERT_LE(std::abs(concat_time(s, c) - t), 2.0 * std::numeric_limits<double>::epsilon() * T);
            }
        }
}

TEST(Schedule, Validation)
{
    SplitSchedule s = schedule(1.0, 3);
    s.sample_times = {0.1, 0.1};
    EXPECT_THROW(s.validate(), ParameterError);
    s.sample_times = {0.1, 1.0};
    EXPECT_THROW(s.validate(), ParameterError);
    s.sample_times = {0.0, 0.5};
    EXPECT_NO_THROW(s.validate());
    s.T = 0.0;
    EXPECT_THROW(s.validate(), ParameterError);
}

TEST(RunPath, SingleIntervalSchedule)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model = NoiseModel::power_law(kTwoPi, 0.5, 2.0, 4);
    const SplitSchedule s = schedule(0.01, 0);
    const SplitPath p = run_path(wavy(g), s, model, sample_increments(model, s, g, 3, 1), 0);
    EXPECT_EQ(p.det_reports.size(), 1u);
    EXPECT_EQ(p.sto_reports.size(), 1u);
    EXPECT_DOUBLE_EQ(p.delta, 0.01);
}

TEST(RunPath, GlueingSharesBuffers)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model = NoiseModel::power_law(kTwoPi, 0.5, 2.0, 4);
    const SplitSchedule s = schedule(0.02, 5);
    const SplitPath p = run_path(wavy(g), s, model, sample_increments(model, s, g, 3, 1), 0);
    ASSERT_EQ(p.intervals(), 6u);
    for (std::size_t j = 1; j <= 6; ++j) {
        EXPECT_EQ(p.sto_start(j).get(), p.det_end[j - 1].get());
        if (j > 1)
            EXPECT_EQ(p.det_start(j).get(), p.sto_end[j - 2].get());
    }
    EXPECT_EQ(&p.final_state(), p.sto_end.back().get());
}

TEST(RunPath, MassAlongThePath)
{
    const Grid g(kTwoPi, 128);
    const NoiseModel model = NoiseModel::power_law(kTwoPi, 0.5, 2.0, 8);
    SplitSchedule s = schedule(0.05, 8);
    s.sample_times = {0.0, 0.004, 0.013, 0.027, 0.049};
    const GridFunction u0 = wavy(g);
    const SplitPath p = run_path(u0, s, model, sample_increments(model, s, g, 11, 1), 0);
    EXPECT_LE(p.max_mass_error, 1e-11);
    ASSERT_EQ(p.series.rows.size(), 6u);
    for (const DiagnosticsRow& r : p.series.rows) {
        EXPECT_NEAR(r.mass, quadrature(u0), 1e-11 * quadrature(u0));
        EXPECT_NEAR(r.residual[0], r.mass - quadrature(u0), 1e-15);
    }
    EXPECT_EQ(p.series.rows.back().time, 0.05);
    EXPECT_EQ(p.snapshots.size(), 5u);
}

TEST(RunPath, SnappingIsReported)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model = NoiseModel::power_law(kTwoPi, 0.5, 2.0, 4);
    SplitSchedule s = schedule(0.02, 3);
    s.sto.n_substeps = 10;
    s.sample_times = {0.0, 0.0081, 0.0119};
    const SplitPath p = run_path(wavy(g), s, model, sample_increments(model, s, g, 1, 1), 0);
    // 0.0081 lies in the stochastic half of interval 2, whose inner grid has spacing
    // delta / 10 = 5e-4 on the internal clock, i.e. 2.5e-4 on the concatenated one.
    ASSERT_EQ(p.snapshots.size(), 3u);
    EXPECT_EQ(p.snapshots[0].snapped_time, 0.0);
    EXPECT_EQ(p.snapshots[1].clock.segment, Segment::stochastic);
    EXPECT_LE(std::abs(p.snapshots[1].snapped_time - 0.0081), 1.25e-4 + 1e-15);
    EXPECT_LE(p.max_snap_distance, 1.25e-4 + 1e-15);
    for (const PathSnapshot& snap : p.snapshots)
        EXPECT_EQ(snap.time, s.sample_times[static_cast<std::size_t>(&snap - p.snapshots.data())]);
}

TEST(RunPath, SilentNoiseIsPureThinFilmFlow)
{
    const Grid g(kTwoPi, 128);
    const GridFunction u0 = wavy(g);
    const NoiseModel silent = NoiseModel::silent(kTwoPi);
    const SplitSchedule s = schedule(0.05, 7);
    const SplitPath p = run_path(u0, s, silent, sample_increments(silent, s, g, 1, 1), 0);
    // Every stochastic substep is the identity.
    for (std::size_t j = 1; j <= p.intervals(); ++j)
        EXPECT_EQ(*p.sto_end[j - 1], *p.det_end[j - 1]);
    // Compare with one continuous deterministic run; both carry a backward-Euler
    // error of order dt_max = delta / 8, so check against a fine reference.
    DetStepConfig fine;
    fine.dt_max = 1e-6;
    const GridFunction ref = det_step(u0, 0.05, fine).state;
    const GridFunction single = det_step(u0, 0.05, DetStepConfig{}).state;
    const double dt_max = s.delta() / 8.0;
    const double split_err = norm_l2(p.final_state() - ref);
    EXPECT_LT(split_err, dt_max * norm_l2(u0 - GridFunction(g, 1.0)));
    EXPECT_LT(norm_l2(single - ref), 0.05 / 8.0 * norm_l2(u0 - GridFunction(g, 1.0)));
}

TEST(RunPath, ConstantsStayPutUnderZeroModeNoise)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model(kTwoPi, {1.0});
    const GridFunction c(g, 0.8);
    const SplitSchedule s = schedule(0.1, 9);
    const SplitPath p = run_path(c, s, model, sample_increments(model, s, g, 4, 1), 0);
    EXPECT_LT((p.final_state() - c).max_abs(), 1e-14);
}

TEST(RunPath, RejectsInadmissibleData)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model = NoiseModel::silent(kTwoPi);
    SplitSchedule s = schedule(0.01, 1);
    GridFunction u = wavy(g);
    u[5] = 0.0;
    s.det.eps_mob = 0.0;
    const WienerIncrements inc = sample_increments(model, s, g, 1, 1);
    EXPECT_THROW(run_path(u, s, model, inc, 0), ParameterError);
    s.det.eps_mob = 1e-8;
    EXPECT_NO_THROW(run_path(u, s, model, inc, 0));
    u[5] = -1e-3;
    EXPECT_THROW(run_path(u, s, model, inc, 0), ParameterError);
}

TEST(RunPath, IncrementLatticeMustMatch)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model = NoiseModel::power_law(kTwoPi, 0.5, 2.0, 4);
    SplitSchedule s = schedule(0.01, 1);
    s.sto.n_substeps = 4;
    EXPECT_THROW(run_path(wavy(g), s, model, WienerIncrements(1, 4, {0.01, 7}, 1), 0), ParameterError);
    EXPECT_THROW(run_path(wavy(g), s, model, WienerIncrements(1, 3, {0.01, 8}, 1), 0), ParameterError);
    EXPECT_THROW(run_path(wavy(g), s, model, WienerIncrements(1, 4, {0.01, 8}, 1), 1), ParameterError);
    EXPECT_NO_THROW(run_path(wavy(g), s, model, WienerIncrements(1, 4, {0.01, 16}, 1), 0));
}

TEST(RunPath, NoiseAlignment)
{
    // With noise on the constant mode only, the stochastic substep is a pure
    // translation; the total shift it applies in interval j must come from the
    // Brownian increments of [(j-1) delta, j delta).
    const Grid g(kTwoPi, 256);
    const NoiseModel model(kTwoPi, {1.0});
    SplitSchedule s = schedule(0.04, 3);
    s.sto.n_substeps = 32;
    s.sto.integrator = StoIntegrator::strat_heun;
    const WienerIncrements inc = sample_increments(model, s, g, 21, 1);
    const SplitPath p = run_path(wavy(g), s, model, inc, 0);
    for (std::size_t j = 1; j <= 4; ++j) {
        double b = 0.0;
        for (std::uint64_t step = (j - 1) * 32; step < j * 32; ++step)
            b += inc(0, 0, step);
        const double shift = b / std::sqrt(kTwoPi);
        // u = 1 + a sin(x - s) has mode-1 phase s.
        auto phase = [&](const GridFunction& u) {
            double c = 0.0, sn = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                c += u[i] * std::cos(g.node(i));
                sn += u[i] * std::sin(g.node(i));
            }
            return std::atan2(-c, sn);
        };
        EXPECT_NEAR(phase(*p.sto_end[j - 1]) - phase(*p.det_end[j - 1]), shift, 1e-5) << j;
    }
}

TEST(RunPath, FailuresNameTheInterval)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model(kTwoPi, {1.0});
    SplitSchedule s = schedule(0.01, 2);
    s.det.dt_min = 1e-3;
    s.det.dt_init = 1e-3;
    s.det.newton_max_iter = 1;
    try {
        run_path(wavy(g), s, model, sample_increments(model, s, g, 1, 1), 0);
        FAIL() << "expected a step failure";
    }
    catch (const StepFailure& e) {
        EXPECT_NE(std::string(e.what()).find("interval 1, deterministic substep"), std::string::npos) << e.what();
    }
}

TEST(RunPath, Deterministic)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model = NoiseModel::power_law(kTwoPi, 0.5, 2.0, 4);
    SplitSchedule s = schedule(0.02, 4);
    s.sample_times = {0.005, 0.015};
    const WienerIncrements inc = sample_increments(model, s, g, 8, 2);
    const SplitPath a = run_path(wavy(g), s, model, inc, 1);
    const SplitPath b = run_path(wavy(g), s, model, inc, 1);
    EXPECT_EQ(a.final_state(), b.final_state());
    ASSERT_EQ(a.series.rows.size(), b.series.rows.size());
    for (std::size_t i = 0; i < a.series.rows.size(); ++i)
        EXPECT_EQ(a.series.rows[i].residual, b.series.rows[i].residual);
}

TEST(RefineStudy, ConstantDataUnderTranslationNoise)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model(kTwoPi, {1.0});
    SplitSchedule s = schedule(0.05, 0);
    const RefineTable t = refine_study(GridFunction(g, 1.1), model, s, {2, 5, 11}, 3, 2);
    for (std::uint64_t n : {3, 6, 12})
        EXPECT_EQ(t.fine_steps % n, 0u);
    for (const RefinePathRow& p : t.paths)
        for (double d : p.diff_final)
            EXPECT_LT(d, 1e-13);
}

TEST(RefineStudy, SilentNoiseConvergesAtFirstOrder)
{
    // Without noise only the backward-Euler error of the inner steps remains;
    // with carry_det_step off the inner steps scale with delta, so halving delta
    // should roughly halve the difference.
    const Grid g(kTwoPi, 128);
    SplitSchedule s = schedule(0.1, 0);
    s.carry_det_step = false;
    const RefineTable t = refine_study(wavy(g), NoiseModel::silent(kTwoPi), s, {3, 7, 15, 31}, 1, 1);
    ASSERT_EQ(t.rms_diff_final.size(), 3u);
    EXPECT_GE(t.rms_diff_final[0] / t.rms_diff_final[1], 1.8);
    EXPECT_GE(t.rms_diff_final[1] / t.rms_diff_final[2], 1.8);
}

TEST(RefineStudy, RejectsBadLists)
{
    const Grid g(kTwoPi, 64);
    const SplitSchedule s = schedule(0.05, 0);
    EXPECT_THROW(refine_study(wavy(g), NoiseModel::silent(kTwoPi), s, {4}, 1), ParameterError);
    EXPECT_THROW(refine_study(wavy(g), NoiseModel::silent(kTwoPi), s, {8, 4}, 1), ParameterError);
}
