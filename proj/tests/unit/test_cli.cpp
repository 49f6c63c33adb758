#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "stfe/cli.hpp"
#include "stfe/io.hpp"

using namespace stfe;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "stfe");
    std::vector<const char*> argv;
    for (const std::string& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = std::filesystem::temp_directory_path() /
               ("stfe_test_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        std::filesystem::remove_all(dir_);
        write_text(dir_ / "small.cfg", "[grid]\nL = 2pi\nM = 64\n[noise]\nlambda = (lambda0=0.5, gamma=2, K=4)\n"
                                       "[schedule]\nT = 0.02\nN = 3\nseed = 11\n");
        unsetenv("STFE_THREADS");
    }
    void TearDown() override
    {
        unsetenv("STFE_THREADS");
        std::filesystem::remove_all(dir_);
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::filesystem::path dir_;
};

}  // namespace

TEST_F(Cli, UsageErrorsExitWithTwo)
{
    CliRun r = cli({"simulate", "--config", path("missing.cfg")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--config"), std::string::npos) << r.err;
    r = cli({"simulate", "--bogus"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--bogus"), std::string::npos) << r.err;
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({"ensemble", "--paths", "many"}).code, 2);
    EXPECT_EQ(cli({"converge", "--N", "4,x"}).code, 2);
    EXPECT_EQ(cli({"selftest", "--only", "11"}).code, 2);
    EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(Cli, InvalidConfigExitsWithTwo)
{
    write_text(dir_ / "dup.cfg", "[grid]\nL = 1\nL = 2\n");
    const CliRun r = cli({"simulate", "--config", path("dup.cfg")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("grid.L"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
}

TEST_F(Cli, BadThreadCountIsAUsageError)
{
    setenv("STFE_THREADS", "0", 1);
    EXPECT_EQ(cli({"simulate", "--config", path("small.cfg"), "--out", path("o")}).code, 2);
}

TEST_F(Cli, SimulateWritesSeriesSnapshotsAndManifest)
{
    const CliRun r = cli({"simulate", "--config", path("small.cfg"), "--out", path("sim"), "--quiet"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    const std::string series = read_text(dir_ / "sim" / "series.csv");
    EXPECT_EQ(series.substr(0, series.find('\n')), series_header(4));
    const CsvTable t = parse_csv(series);
    EXPECT_EQ(t.rows.size(), 5u);  // four sample times and T
    EXPECT_EQ(read_text(dir_ / "sim" / "snapshot_000.csv").substr(0, 4), "x,u\n");
    const auto m = nlohmann::json::parse(read_text(dir_ / "sim" / "manifest.json"));
    EXPECT_EQ(m["command"], "simulate");
    EXPECT_EQ(m["seed"], 11u);
    EXPECT_TRUE(m["summary"]["pass"].get<bool>());
    for (const auto& f : m["outputs"])
        EXPECT_EQ(f["sha256"], sha256_hex(read_text(dir_ / "sim" / f["file"].get<std::string>())));
}

TEST_F(Cli, SeedChangesTheOutput)
{
    ASSERT_EQ(cli({"simulate", "--config", path("small.cfg"), "--out", path("a"), "--quiet"}).code, 0);
    ASSERT_EQ(cli({"simulate", "--config", path("small.cfg"), "--out", path("b"), "--quiet"}).code, 0);
    ASSERT_EQ(cli({"simulate", "--config", path("small.cfg"), "--out", path("c"), "--seed", "12", "--quiet"}).code, 0);
    EXPECT_EQ(read_text(dir_ / "a" / "series.csv"), read_text(dir_ / "b" / "series.csv"));
    EXPECT_NE(read_text(dir_ / "a" / "series.csv"), read_text(dir_ / "c" / "series.csv"));
}

TEST_F(Cli, EnsembleIsIndependentOfThreadCount)
{
    setenv("STFE_THREADS", "1", 1);
    const CliRun a = cli({"ensemble", "--config", path("small.cfg"), "--out", path("e1"), "--paths", "64", "--quiet"});
    setenv("STFE_THREADS", "3", 1);
    const CliRun b = cli({"ensemble", "--config", path("small.cfg"), "--out", path("e3"), "--paths", "64", "--quiet"});
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    const std::string csv = read_text(dir_ / "e1" / "ensemble.csv");
    EXPECT_EQ(csv, read_text(dir_ / "e3" / "ensemble.csv"));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), ensemble_header(4));
    const auto m1 = nlohmann::json::parse(read_text(dir_ / "e1" / "manifest.json"));
    const auto m3 = nlohmann::json::parse(read_text(dir_ / "e3" / "manifest.json"));
    EXPECT_EQ(m1["outputs"], m3["outputs"]);
    EXPECT_EQ(m1["summary"]["verdicts"].size(), 4u);
}

TEST_F(Cli, ConvergeTable)
{
    const CliRun r = cli({"converge", "--config", path("small.cfg"), "--out", path("cv"), "--N", "4,8,16", "--quiet"});
    EXPECT_EQ(r.code, 0) << r.err;
    const CsvTable t = read_csv(dir_ / "cv" / "converge.csv");
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_EQ(t.rows[0][0], 4.0);
    EXPECT_LE(t.rows[1][2], t.rows[0][2]);
    EXPECT_EQ(read_csv(dir_ / "cv" / "converge_paths.csv").rows.size(), 16u);  // 8 paths, two pairs each
}

TEST_F(Cli, SelftestSingleCriterion)
{
    const CliRun r = cli({"selftest", "--only", "9", "--quiet"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out.rfind("PASS  criterion 9", 0), 0u) << r.out;
}
