#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "bell/cfg.hpp"
#include "bell/isa.hpp"
#include "bell/pipeline.hpp"
#include "bell/sim.hpp"
#include "bell/ssa.hpp"

namespace {

const char* kFiles[] = {"simple_pulse.json", "variable_readout.json", "active_feedback.json",
                        "nested_loop.json",  "multi_var_feedback.json", "while_threshold.json"};

bell::SeqProgram load(int i) { return bell::load_program(std::filesystem::path(BELL_PROGRAMS_DIR) / kFiles[i]); }

void BM_Compile(benchmark::State& state) {
    const bell::SeqProgram p = load(static_cast<int>(state.range(0)));
    state.SetLabel(kFiles[state.range(0)]);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bell::compile(p));
    }
}
BENCHMARK(BM_Compile)->DenseRange(0, 5)->Unit(benchmark::kMicrosecond);

void BM_CfgAndSsa(benchmark::State& state) {
    const bell::SeqProgram p = load(4);
    for (auto _ : state) {
        const bell::Cfg cfg = bell::build_cfg(p);
        benchmark::DoNotOptimize(bell::to_ssa(cfg, bell::compute_dominators(cfg)));
    }
}
BENCHMARK(BM_CfgAndSsa)->Unit(benchmark::kMicrosecond);

void BM_RegisterAllocation(benchmark::State& state) {
    const bell::CompileResult r = bell::compile(load(4));
    bell::RegFile rf;
    rf.total = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(bell::allocate_registers(r.lowered, rf));
    }
}
BENCHMARK(BM_RegisterAllocation)->Arg(4)->Arg(5)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_SimulateActiveFeedback(benchmark::State& state) {
    const bell::CompileResult r = bell::compile(load(2));
    const auto tables = r.table_map();
    bell::SimOptions o;
    o.record_exec = state.range(0) != 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            bell::simulate(r.boards, tables, bell::TimingModel{}, bell::DetectionScript::cyclic({3, 7}), o));
    }
}
BENCHMARK(BM_SimulateActiveFeedback)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_EncodeDecode(benchmark::State& state) {
    std::mt19937 rng(1);
    std::vector<bell::MachineInstr> prog;
    for (int i = 0; i < 1024; ++i) {
        prog.push_back({bell::Op::ADDI, static_cast<std::uint8_t>(rng() % 32), static_cast<std::uint8_t>(rng() % 32),
                        0, static_cast<std::int32_t>(rng() % 4096) - 2048});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(bell::decode_all(bell::encode_all(prog)));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(prog.size()));
}
BENCHMARK(BM_EncodeDecode);

}  // namespace

BENCHMARK_MAIN();
