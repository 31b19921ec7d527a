#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "xpoint/serialize.hpp"

namespace fs = std::filesystem;
using namespace xpoint;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("xpoint_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(const std::string& args, const std::string& env = "") const
    {
        const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" XPOINT_CLI_PATH "' " + args +
                                " > stdout.txt 2> stderr.txt";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string slurp(const std::string& name) const
    {
        std::ifstream in(dir_ / name);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void write(const std::string& name, const std::string& text) const
    {
        std::ofstream(dir_ / name) << text;
    }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, SimulateUniformMatrix)
{
    write("a.csv", "2.1,2.1,2.1\n2.1,2.1,2.1\n2.1,2.1,2.1\n");
    ASSERT_EQ(run("simulate a.csv --delta 0.01 --out out/run --json"), 0) << slurp("stderr.txt");
    const json s = json::parse(slurp("stdout.txt"));
    EXPECT_LE(s.at("epsilon").get<double>(), 1e-3);
    EXPECT_FALSE(s.at("computing_time_s").is_null());

    std::ifstream trace(dir_ / "out/run.trace.csv");
    const TraceTable t = read_trace_csv(trace);
    EXPECT_EQ(t.header.size(), 4u);
    EXPECT_EQ(json::parse(slurp("out/run.summary.json")), s);

    const json m = json::parse(slurp("out/run.manifest.json"));
    EXPECT_EQ(m.at("command"), "simulate");
    // omitted flags resolve to the defaults
    const json& p = m.at("params");
    EXPECT_EQ(p.at("alpha").get<double>(), 0.05);
    EXPECT_EQ(p.at("l0").get<double>(), 1e5);
    EXPECT_EQ(p.at("gbw_hz").get<double>(), 16e6);
    EXPECT_EQ(p.at("vsupp").get<double>(), 1.0);
    EXPECT_EQ(p.at("x0").get<double>(), 1e-3);
    EXPECT_EQ(p.at("tmax").get<double>(), 1e-3);
    EXPECT_EQ(m.at("inputs").at(0).at("fnv1a64").get<std::string>().size(), 16u);
}

TEST_F(Cli, NegativeDeltaReportsNoConvergence)
{
    write("a.csv", "1,2\n3,4\n");
    EXPECT_EQ(run("simulate a.csv --delta -0.01 --out r"), 2);
}

TEST_F(Cli, UsageAndInputErrors)
{
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("simulate missing.csv"), 1);
    write("bad.csv", "1,2\n3,x\n");
    EXPECT_EQ(run("simulate bad.csv"), 1);
    EXPECT_NE(slurp("stderr.txt").find("line 2"), std::string::npos) << slurp("stderr.txt");
    write("neg.csv", "1,-2\n3,4\n");
    EXPECT_EQ(run("simulate neg.csv"), 1);
    write("e.txt", "1 2\n2 x\n");
    EXPECT_EQ(run("pagerank e.txt"), 1);
    EXPECT_NE(slurp("stderr.txt").find("line 2"), std::string::npos);
    EXPECT_EQ(run("sweep --mode nope"), 1);
}

TEST_F(Cli, RerunReproducesOutputsBitForBit)
{
    write("a.csv", "0.6,2.4,3.1\n1.9,4.2,0.9\n2.9,1.2,3.4\n");
    ASSERT_EQ(run("simulate a.csv --delta 0.02 --alpha 0.1 --out o/s"), 0);
    const std::string trace = slurp("o/s.trace.csv");
    const std::string summary = slurp("o/s.summary.json");
    fs::remove(dir_ / "o/s.trace.csv");
    ASSERT_EQ(run("rerun o/s.manifest.json"), 0);
    EXPECT_EQ(slurp("o/s.trace.csv"), trace);
    EXPECT_EQ(slurp("o/s.summary.json"), summary);
}

TEST_F(Cli, PagerankSubsetAndDefaults)
{
    write("e.txt", "# toy web\n1 2\n2 1\n3 1\n4 1\n4 3\n5 4\n6 1\n");
    ASSERT_EQ(run("pagerank e.txt --subset-n 4 --topk 3 --out pr --json"), 0) << slurp("stderr.txt");
    const json s = json::parse(slurp("stdout.txt"));
    EXPECT_EQ(s.at("n"), 4);
    EXPECT_EQ(s.at("top").size(), 3u);
    EXPECT_EQ(s.at("top").at(0), 1);
    const json m = json::parse(slurp("pr.manifest.json"));
    EXPECT_EQ(m.at("params").at("p").get<double>(), 0.85);
    const json r = json::parse(slurp("pr.rank.json"));
    EXPECT_EQ(r.at("scores").size(), 4u);
    EXPECT_EQ(slurp("pr.rank.csv").substr(0, 16), "rank,page,score\n");
}

TEST_F(Cli, SweepWritesReportAndResumes)
{
    const std::string args = "sweep --mode size --sizes 3..6 --trials 2 --deltas 0.02,0.04 --seed 5";
    ASSERT_EQ(run(args + " --json", "XPOINT_OUT_DIR=envout"), 0) << slurp("stderr.txt");
    ASSERT_TRUE(fs::exists(dir_ / "envout/sweep-size/rows.csv"));
    const std::string rows = slurp("envout/sweep-size/rows.csv");
    std::istringstream in(rows);
    const auto parsed = read_sweep_csv(in);
    EXPECT_EQ(parsed.size(), 8u); // sizes 3 and 6
    const json summary = json::parse(slurp("envout/sweep-size/summary.json"));
    EXPECT_EQ(summary.at("aggregates").size(), 4u);
    EXPECT_EQ(json::parse(slurp("stdout.txt")), summary);

    // drop the last two rows to mimic an interrupted run, then resume
    std::string cut = rows;
    for (int k = 0; k < 2; ++k) {
        cut.erase(cut.find_last_of('\n', cut.size() - 2) + 1);
    }
    std::ofstream(dir_ / "envout/sweep-size/rows.csv") << cut;
    ASSERT_EQ(run(args, "XPOINT_OUT_DIR=envout"), 0);
    EXPECT_NE(slurp("stderr.txt").find("resuming: 6 completed rows"), std::string::npos) << slurp("stderr.txt");
    EXPECT_EQ(slurp("envout/sweep-size/rows.csv"), rows);
}

TEST_F(Cli, SweepDeltaIsMonotone)
{
    write("a.csv", "0.6,2.4,3.1\n1.9,4.2,0.9\n2.9,1.2,3.4\n");
    ASSERT_EQ(run("sweep --mode delta --matrix a.csv --out-dir d"), 0) << slurp("stderr.txt");
    std::ifstream in(dir_ / "d/rows.csv");
    const auto rows = read_sweep_csv(in);
    ASSERT_EQ(rows.size(), 6u);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_LT(*rows[i].computing_time, *rows[i - 1].computing_time);
    }
}

TEST_F(Cli, SweepVariation)
{
    write("a.csv", "0.6,2.4,3.1\n1.9,4.2,0.9\n2.9,1.2,3.4\n");
    ASSERT_EQ(run("sweep --mode variation --matrix a.csv --trials 3 --out-dir v"), 0) << slurp("stderr.txt");
    std::ifstream in(dir_ / "v/rows.csv");
    const auto rows = read_sweep_csv(in);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].kind, "uniform");
    EXPECT_EQ(rows[1].kind, "varied");
}
