#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "stfe/ensemble.hpp"
#include "stfe/martingale.hpp"

using namespace stfe;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

GridFunction wavy(const Grid& g)
{
    return GridFunction::sample(g, [&](double x) { return 1.0 + 0.5 * std::sin(kTwoPi * x / g.length()); });
}

SplitSchedule small_schedule()
{
    SplitSchedule s;
    s.T = 0.02;
    s.N = 3;
    s.sample_times = {0.0, 0.007, 0.013};
    return s;
}

void expect_same(const MomentStats& a, const MomentStats& b)
{
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.variance, b.variance);
    EXPECT_EQ(a.se, b.se);
    EXPECT_EQ(a.min, b.min);
    EXPECT_EQ(a.max, b.max);
}

}  // namespace

TEST(Ensemble, SinglePathHasNoSpread)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model = NoiseModel::power_law(kTwoPi, 0.5, 2.0, 4);
    const SplitSchedule s = small_schedule();
    EnsembleConfig cfg;
    cfg.n_paths = 1;
    cfg.seed = 5;
    const EnsembleStats st = run_ensemble(wavy(g), s, model, cfg);
    const SplitPath p = run_path(wavy(g), s, model, WienerIncrements(5, 4, SplitRunner(g, s, model).lattice(), 1), 0);
    ASSERT_EQ(st.rows.size(), p.series.rows.size());
    for (std::size_t r = 0; r < st.rows.size(); ++r) {
        EXPECT_EQ(st.rows[r].energy.mean, p.series.rows[r].energy);
        EXPECT_EQ(st.rows[r].energy.variance, 0.0);
        EXPECT_EQ(st.rows[r].phi[1].residual.mean, p.series.rows[r].residual[1]);
        EXPECT_EQ(st.rows[r].phi[1].residual.se, 0.0);
    }
}

TEST(Ensemble, SilentNoiseGivesIdenticalPaths)
{
    const Grid g(kTwoPi, 64);
    EnsembleConfig cfg;
    cfg.n_paths = 8;
    const EnsembleStats st = run_ensemble(wavy(g), small_schedule(), NoiseModel::silent(kTwoPi), cfg);
    for (const EnsembleRow& row : st.rows) {
        EXPECT_EQ(row.energy.variance, 0.0);
        EXPECT_EQ(row.mass.variance, 0.0);
        EXPECT_EQ(row.entropy_signed.variance, 0.0);
        for (const ResidualStats& rs : row.phi)
            EXPECT_EQ(rs.residual.variance, 0.0);
    }
    for (const MartingaleVerdict& v : st.verdicts)
        EXPECT_TRUE(v.pass);
}

TEST(Ensemble, ZeroModeNoiseKeepsPathwiseInvariants)
{
    const Grid g(kTwoPi, 128);
    SplitSchedule s = small_schedule();
    s.sto.integrator = StoIntegrator::strat_heun;
    EnsembleConfig cfg;
    cfg.n_paths = 16;
    const EnsembleStats st = run_ensemble(wavy(g), s, NoiseModel(kTwoPi, {1.0}), cfg);
    for (const EnsembleRow& row : st.rows) {
        EXPECT_LE(std::sqrt(row.mass.variance), 1e-13 * row.mass.mean);
        // The thin-film flow commutes with translations up to the sub-grid part of the shift.
        EXPECT_LE(std::sqrt(row.energy.variance), 1e-4 * row.energy.mean);
    }
}

TEST(Ensemble, WorkerCountDoesNotMatter)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model = NoiseModel::power_law(kTwoPi, 0.5, 2.0, 4);
    EnsembleConfig one;
    one.n_paths = 10;
    one.seed = 99;
    EnsembleConfig three = one;
    three.workers = 3;
    const EnsembleStats a = run_ensemble(wavy(g), small_schedule(), model, one);
    const EnsembleStats b = run_ensemble(wavy(g), small_schedule(), model, three);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    EXPECT_EQ(a.min_value, b.min_value);
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        expect_same(a.rows[r].energy, b.rows[r].energy);
        expect_same(a.rows[r].min_u, b.rows[r].min_u);
        expect_same(a.rows[r].dissipation, b.rows[r].dissipation);
        for (std::size_t k = 0; k < a.rows[r].phi.size(); ++k) {
            expect_same(a.rows[r].phi[k].residual, b.rows[r].phi[k].residual);
            expect_same(a.rows[r].phi[k].compensated, b.rows[r].phi[k].compensated);
        }
    }
}

TEST(Ensemble, StandardErrorDefinition)
{
    const Grid g(kTwoPi, 64);
    EnsembleConfig cfg;
    cfg.n_paths = 12;
    const EnsembleStats st = run_ensemble(wavy(g), small_schedule(), NoiseModel::power_law(kTwoPi, 0.5, 2.0, 4), cfg);
    for (const EnsembleRow& row : st.rows)
        EXPECT_DOUBLE_EQ(row.energy.se, std::sqrt(row.energy.variance / 12.0));
}

TEST(Ensemble, TooManyFailuresAbort)
{
    const Grid g(kTwoPi, 64);
    SplitSchedule s = small_schedule();
    s.det.dt_init = s.det.dt_min = 1e-3;
    s.det.newton_max_iter = 1;
    EnsembleConfig cfg;
    cfg.n_paths = 4;
    try {
        run_ensemble(wavy(g), s, NoiseModel::silent(kTwoPi), cfg);
        FAIL() << "expected EnsembleFailure";
    }
    catch (const EnsembleFailure& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("4 of 4 paths failed"), std::string::npos) << msg;
        EXPECT_NE(msg.find("path 3: interval 1"), std::string::npos) << msg;
    }
}

TEST(Ensemble, ConfigValidation)
{
    EnsembleConfig cfg;
    cfg.n_paths = 0;
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg.n_paths = 1;
    cfg.workers = 0;
    EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(MartingaleTest, SyntheticVerdicts)
{
    EnsembleStats st;
    st.n_test_functions = 1;
    st.phi_u0 = {0.0};
    EnsembleRow row;
    row.time = 0.5;
    ResidualStats rs;
    rs.residual.mean = 0.29;
    rs.residual.se = 0.1;
    rs.compensated.mean = 0.0;
    rs.compensated.se = 1.0;
    row.phi.push_back(rs);
    st.rows.push_back(row);
    EXPECT_TRUE(martingale_test(st)[0].pass);
    st.rows[0].phi[0].residual.mean = 0.31;
    const MartingaleVerdict v = martingale_test(st)[0];
    EXPECT_FALSE(v.pass);
    EXPECT_EQ(v.worst_time, 0.5);
    st.rows[0].phi[0].residual.mean = 0.0;
    st.rows[0].phi[0].compensated.mean = -5.01;
    EXPECT_FALSE(martingale_test(st)[0].pass);
}

TEST(MartingaleTest, DetectsDoubledCorrection)
{
    // Strong noise on the modes |k| <= 1 over a long horizon, so the bias
    // t (C w, phi) from a doubled correction drift exceeds 3 standard errors.
    const Grid g(kTwoPi, 32);
    const NoiseModel model = NoiseModel::power_law(kTwoPi, 2.0, 2.0, 1);
    SplitSchedule s;
    s.T = 1.0;
    s.N = 4;
    s.sample_times = {0.0, 0.25, 0.5, 0.75};
    EnsembleConfig cfg;
    cfg.n_paths = 256;
    cfg.seed = 77;
    const EnsembleStats good = run_ensemble(wavy(g), s, model, cfg);
    for (const MartingaleVerdict& v : good.verdicts)
        EXPECT_TRUE(v.pass) << "phi " << v.phi;
    s.sto.correction_scale = 2.0;
    const EnsembleStats bad = run_ensemble(wavy(g), s, model, cfg);
    bool any_fail = false;
    for (const MartingaleVerdict& v : bad.verdicts)
        any_fail = any_fail || !v.pass;
    EXPECT_TRUE(any_fail);
}

TEST(MartingaleResidual, LooksUpRecordedTimes)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model = NoiseModel::power_law(kTwoPi, 0.5, 2.0, 4);
    const SplitSchedule s = small_schedule();
    const SplitPath p = run_path(wavy(g), s, model, sample_increments(model, s, g, 2, 1), 0);
    const auto m = martingale_residual(p, model, TestFunctionSet::defaults(), 0.007);
    ASSERT_EQ(m.size(), 4u);
    EXPECT_EQ(m[1].residual, p.series.rows[1].residual[1]);
    EXPECT_EQ(m[1].qvar, p.series.rows[1].qvar[1]);
    EXPECT_NO_THROW(martingale_residual(p, model, TestFunctionSet::defaults(), p.series.rows[1].snapped_time));
    EXPECT_NO_THROW(martingale_residual(p, model, TestFunctionSet::defaults(), s.T));
    EXPECT_THROW(martingale_residual(p, model, TestFunctionSet::defaults(), 0.008), DomainError);
    EXPECT_THROW(martingale_residual(p, model, TestFunctionSet{{TestFunction{{{0, 1.0}}}}}, 0.007), ParameterError);
    EXPECT_THROW(martingale_residual(p, NoiseModel::silent(kTwoPi), TestFunctionSet::defaults(), 0.007), ParameterError);
}

TEST(MartingaleResidual, ConstantTestFunctionIsMassDrift)
{
    const Grid g(kTwoPi, 64);
    const NoiseModel model = NoiseModel::power_law(kTwoPi, 0.5, 2.0, 4);
    const SplitSchedule s = small_schedule();
    const GridFunction u0 = wavy(g);
    const SplitPath p = run_path(u0, s, model, sample_increments(model, s, g, 2, 1), 0);
    for (const DiagnosticsRow& row : p.series.rows) {
        const auto m = martingale_residual(p, model, TestFunctionSet::defaults(), row.time);
        EXPECT_LE(std::abs(m[0].residual), 1e-11);
        EXPECT_EQ(m[0].residual, row.mass - quadrature(u0));
        EXPECT_EQ(m[0].qvar, 0.0);
    }
}

TEST(MartingaleResidual, SilentNoiseLeavesOnlySolverDefect)
{
    // Without noise the residual is the weak-form defect of the inner steps,
    // which the backward-Euler identity makes as small as the Newton tolerance;
    // bound it by 10x the time-discretisation error of the run.
    const Grid g(kTwoPi, 64);
    const NoiseModel silent = NoiseModel::silent(kTwoPi);
    SplitSchedule s = small_schedule();
    const GridFunction u0 = wavy(g);
    const SplitPath p = run_path(u0, s, silent, sample_increments(silent, s, g, 1, 1), 0);
    DetStepConfig fine;
    fine.dt_max = 1e-6;
    const double disc_err = norm_l2(p.final_state() - det_step(u0, s.T, fine).state);
    const auto m = martingale_residual(p, silent, TestFunctionSet::defaults(), s.T);
    for (const MartingaleValue& v : m) {
        EXPECT_LE(std::abs(v.residual), 10.0 * disc_err);
        EXPECT_EQ(v.qvar, 0.0);
    }
}
