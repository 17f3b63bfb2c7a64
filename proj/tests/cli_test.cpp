#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "bell/pipeline.hpp"
#include "cli.hpp"
#include "support/semantics.hpp"

namespace bell {
namespace {

namespace fs = std::filesystem;
using testing::benchmark_path;

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun bell_cli(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("bell_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
};

TEST_F(CliTest, CompileActiveFeedbackWritesSixStagesTwoBinariesTwoTables) {
    const auto out = dir_ / "out";
    const CliRun r = bell_cli({"compile", benchmark_path("active_feedback.json").string(), "-o", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::set<std::string> files;
    for (const auto& e : fs::directory_iterator(out)) {
        files.insert(e.path().filename().string());
    }
    const std::set<std::string> want{"program.tree.json", "program.cfg.txt",   "program.ssa.txt",   "program.igraph.txt",
                                     "program.alloc.txt", "program.asm",       "dds0.bin",          "ttl0.bin",
                                     "dds0.steptable.bin", "dds0.steptable.json", "ttl0.steptable.bin",
                                     "ttl0.steptable.json", "manifest.json"};
    EXPECT_EQ(files, want);

    const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
    for (const auto& a : m.at("artifacts")) {
        const std::string bytes = slurp(out / a.at("file").get<std::string>());
        EXPECT_EQ(a.at("fnv1a64").get<std::string>(), hex64(fnv1a64(std::string_view(bytes)))) << a.at("file");
    }
}

TEST_F(CliTest, EmitCfgWritesExactlyOneArtifact) {
    const auto out = dir_ / "cfg";
    const CliRun r =
        bell_cli({"compile", benchmark_path("simple_pulse.json").string(), "-o", out.string(), "--emit=cfg"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::set<std::string> files;
    for (const auto& e : fs::directory_iterator(out)) {
        files.insert(e.path().filename().string());
    }
    EXPECT_EQ(files, (std::set<std::string>{"manifest.json", "program.cfg.txt"}));
}

TEST_F(CliTest, RecompileIsByteIdentical) {
    for (int i = 0; i < 2; ++i) {
        const CliRun r = bell_cli({"compile", benchmark_path("multi_var_feedback.json").string(), "-o",
                                (dir_ / std::to_string(i)).string(), "--emit=all,liveness"});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    for (const auto& e : fs::directory_iterator(dir_ / "0")) {
        if (e.path().filename() == "manifest.json") {
            continue;  // carries wall-clock timings
        }
        EXPECT_EQ(slurp(e.path()), slurp(dir_ / "1" / e.path().filename())) << e.path();
    }
}

TEST_F(CliTest, MalformedInputExitsTwoWithSchemaError) {
    std::ofstream(dir_ / "bad.json") << "{\"schema_version\": 1,";
    const CliRun r = bell_cli({"compile", (dir_ / "bad.json").string(), "-o", (dir_ / "o").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("SchemaError"), std::string::npos) << r.err;
    EXPECT_EQ(bell_cli({"compile"}).code, 2);
    EXPECT_EQ(bell_cli({"frobnicate"}).code, 2);
}

TEST_F(CliTest, SimAssertsLatencyAndReportsLockstep) {
    const CliRun r = bell_cli({"sim", "run", benchmark_path("active_feedback.json").string(), "--counts", "3,7",
                            "--cycle", "--assert-latency-ns", "700", "--trace", (dir_ / "t.jsonl").string(),
                            "--summary", (dir_ / "s.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("max latency 688 ns, PASS"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("lockstep: PASS"), std::string::npos);
    EXPECT_GT(fs::file_size(dir_ / "t.jsonl"), 0u);
    const auto summary = nlohmann::json::parse(slurp(dir_ / "s.json"));
    EXPECT_TRUE(summary.is_object());

    const CliRun tight = bell_cli({"sim", "run", benchmark_path("active_feedback.json").string(), "--seed", "2",
                                "--assert-latency-ns", "600"});
    EXPECT_EQ(tight.code, 3) << tight.out;
    EXPECT_NE(tight.out.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, SimFromCompiledBundle) {
    const auto out = dir_ / "bundle";
    ASSERT_EQ(bell_cli({"compile", benchmark_path("active_feedback.json").string(), "-o", out.string()}).code, 0);
    const CliRun r = bell_cli({"sim", "run", out.string(), "--seed", "4"});
    EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, MaxTicksExitsThree) {
    const CliRun r = bell_cli({"sim", "run", benchmark_path("nested_loop.json").string(), "--max-ticks=10"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("MaxTicksExceeded"), std::string::npos) << r.err;
}

TEST_F(CliTest, ScanSimulatesEveryPointWithOneControlHash) {
    const CliRun r = bell_cli({"sim", "run", benchmark_path("cool_freq_scan.json").string(), "--seed", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("10 points"), std::string::npos);
    EXPECT_NE(r.out.find("[point9 "), std::string::npos);

    const CliRun e = bell_cli({"scan", "expand", benchmark_path("cool_freq_scan.json").string(), "-o", dir_.string()});
    ASSERT_EQ(e.code, 0) << e.err;
    const auto j = nlohmann::json::parse(slurp(dir_ / "scan.json"));
    ASSERT_EQ(j.at("points").size(), 10u);
    std::set<std::string> table_hashes;
    for (const auto& p : j.at("points")) {
        EXPECT_EQ(p.at("control_hash"), j.at("control_hash"));
        table_hashes.insert(p.at("tables").at("dds0").get<std::string>());
    }
    EXPECT_EQ(table_hashes.size(), 10u);
}

TEST_F(CliTest, BenchAndCompactnessReports) {
    const CliRun b = bell_cli({"bench", (testing::programs_dir() / "manifest.json").string(), "--json",
                            (dir_ / "bench.json").string()});
    EXPECT_EQ(b.code, 0) << b.out << b.err;
    EXPECT_NE(b.out.find("1000x"), std::string::npos);
    EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "bench.json")).size(), 6u);

    const CliRun c = bell_cli({"report", "compactness", benchmark_path("while_threshold.json").string()});
    EXPECT_EQ(c.code, 0);
    EXPECT_NE(c.out.find("---"), std::string::npos);
}

TEST_F(CliTest, BandViolationExitsThree) {
    auto m = nlohmann::json::parse(slurp(testing::programs_dir() / "manifest.json"));
    m["benchmarks"][0]["reference"]["st_entries"] = 5;
    for (auto& b : m["benchmarks"]) {
        b["file"] = (testing::programs_dir() / b["file"].get<std::string>()).string();
    }
    std::ofstream(dir_ / "m.json") << m.dump();
    const CliRun r = bell_cli({"bench", (dir_ / "m.json").string()});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("BandViolation: Simple pulse: st_entries"), std::string::npos) << r.err;
}

TEST_F(CliTest, BinaryExitCodes) {
    auto status = [](const std::string& cmd) {
        const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    const std::string exe = BELL_CLI_PATH;
    EXPECT_EQ(status(exe + " --help"), 0);
    EXPECT_EQ(status(exe + " compile /nonexistent.json -o " + (dir_ / "x").string()), 2);
    EXPECT_EQ(status(exe + " sim run " + benchmark_path("nested_loop.json").string() + " --max-ticks 10"), 3);
    EXPECT_EQ(status(exe + " compile " + benchmark_path("simple_pulse.json").string() + " -o " + (dir_ / "y").string()),
              0);
}

}  // namespace
}  // namespace bell
