#pragma once

// Benchmark suite: compile + simulate each program named in a manifest and
// compare its metrics with published reference values.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bell/pipeline.hpp"
#include "bell/sim.hpp"

namespace bell {

struct ReferenceMetrics {
    std::size_t cfg_blocks = 0;
    std::size_t ssa_vars = 0;
    std::size_t asm_instructions = 0;
    std::size_t st_entries = 0;
    std::optional<std::uint64_t> iterations;  // nullopt: unbounded
    std::optional<std::uint64_t> naive_configs;
    std::optional<std::uint64_t> reduction;
};

struct BenchmarkSpec {
    std::string name;
    std::filesystem::path file;
    ReferenceMetrics reference;
    bool feedback = false;  // has conditional steps right after a counter read
    std::vector<std::int32_t> counts{3, 7};  // cyclic detection pattern
    std::optional<std::pair<double, double>> latency_ns;  // inclusive window
};

struct Bands {
    std::size_t cfg_blocks = 3;
    std::size_t ssa_vars = 2;
    double asm_fraction = 0.5;
    double compile_ms = 100;
    double feedback_latency_ns_max = 700;
};

struct SuiteManifest {
    std::filesystem::path dir;
    Bands bands;
    std::vector<BenchmarkSpec> benchmarks;
};

// Relative `file` entries resolve against the manifest's directory.
SuiteManifest load_manifest(const std::filesystem::path& path);

struct BenchmarkRow {
    std::string name;
    CompileStats stats;
    std::vector<StageTiming> timings;
    double compile_ms = 0;
    CompactnessRow compactness;
    std::vector<LatencyRecord> latency;
    bool lockstep_ok = true;
    std::size_t protocol_violations = 0;
    std::vector<std::string> violations;  // band/equality failures
};

BenchmarkRow run_benchmark(const BenchmarkSpec& spec, const Bands& bands, const CompileOptions& options = {});
std::vector<BenchmarkRow> run_suite(const SuiteManifest& m, const CompileOptions& options = {});

std::string format_metrics_table(const std::vector<BenchmarkRow>& rows);
std::string suite_json(const std::vector<BenchmarkRow>& rows);

}  // namespace bell
