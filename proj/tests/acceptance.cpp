// One PASS/FAIL line per acceptance criterion; exit status is the number of
// failing criteria. Reference values are restated here rather than read
// from programs/manifest.json so that editing the manifest cannot move the
// goalposts.

#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bell/cfg.hpp"
#include "bell/errors.hpp"
#include "bell/pipeline.hpp"
#include "bell/sim.hpp"
#include "bell/ssa.hpp"
#include "support/oracles.hpp"
#include "support/random_program.hpp"
#include "support/semantics.hpp"

namespace bell {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Reference {
    const char* name;
    const char* file;
    std::size_t blocks;
    std::size_t ssa_vars;
    std::size_t asm_instrs;
    std::size_t st_entries;
    std::optional<std::uint64_t> naive;
    std::optional<std::uint64_t> reduction;
    bool feedback;
};

const std::vector<Reference> kRefs{
    {"Simple pulse", "simple_pulse.json", 6, 0, 16, 4, 400, 100, false},
    {"Variable readout", "variable_readout.json", 8, 4, 25, 4, 200, 50, false},
    {"Active feedback", "active_feedback.json", 10, 4, 30, 6, 120, 20, true},
    {"Nested loop", "nested_loop.json", 12, 5, 34, 4, 4000, 1000, false},
    {"Multi-var feedback", "multi_var_feedback.json", 11, 11, 42, 7, 700, 100, true},
    {"While-loop threshold", "while_threshold.json", 7, 4, 22, 4, std::nullopt, std::nullopt, false},
};

// Counts with both outcomes of every benchmark's conditions.
DetectionScript bench_script() { return DetectionScript::cyclic({3, 7, 1, 6, 2, 9}); }

struct Verdict {
    bool ok = true;
    std::ostringstream detail;

    void fail(const std::string& why) {
        if (ok) {
            detail.str("");
        }
        ok = false;
        detail << why << "; ";
    }
};

std::string opt(const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : "unbounded"; }

Verdict compactness() {
    Verdict v;
    const auto t0 = Clock::now();
    for (const auto& ref : kRefs) {
        const CompileResult r = compile_file(testing::benchmark_path(ref.file));
        const CompactnessRow row = compactness_report(ref.name, r.program, r.tables);
        if (row.entries != ref.st_entries || row.naive_configs != ref.naive || row.reduction != ref.reduction) {
            v.fail(std::string(ref.name) + ": k=" + std::to_string(row.entries) + " naive=" + opt(row.naive_configs) +
                   " reduction=" + opt(row.reduction));
        }
        if (row.naive_configs && *row.naive_configs != *row.iterations * row.entries) {
            v.fail(std::string(ref.name) + ": naive != n*k");
        }
    }
    const double s = seconds_since(t0);
    if (s >= 1.0) {
        v.fail("took " + std::to_string(s) + " s");
    }
    if (v.ok) {
        v.detail << "k={4,4,6,4,7,4}, naive={400,200,120,4000,700,---}, reduction={100,50,20,1000,100,---}x in "
                 << static_cast<int>(s * 1000) << " ms";
    }
    return v;
}

Verdict sanity_bands() {
    Verdict v;
    std::ostringstream seen;
    for (const auto& ref : kRefs) {
        const CompileResult r = compile_file(testing::benchmark_path(ref.file));
        const auto& s = r.stats;
        auto within = [](std::size_t x, std::size_t want, std::size_t tol) {
            return x + tol >= want && x <= want + tol;
        };
        if (!within(s.cfg_blocks, ref.blocks, 3)) {
            v.fail(std::string(ref.name) + ": blocks " + std::to_string(s.cfg_blocks));
        }
        if (!within(s.ssa_vars, ref.ssa_vars, 2)) {
            v.fail(std::string(ref.name) + ": ssa vars " + std::to_string(s.ssa_vars));
        }
        if (s.asm_instructions < 0.5 * ref.asm_instrs || s.asm_instructions > 1.5 * ref.asm_instrs) {
            v.fail(std::string(ref.name) + ": asm " + std::to_string(s.asm_instructions));
        }
        if (s.st_entries != ref.st_entries) {
            v.fail(std::string(ref.name) + ": st " + std::to_string(s.st_entries));
        }
        seen << s.cfg_blocks << "/" << s.ssa_vars << "/" << s.asm_instructions << "/" << s.st_entries << " ";
    }
    if (v.ok) {
        v.detail << "blocks/vars/asm/st: " << seen.str();
    }
    return v;
}

Verdict compile_time() {
    Verdict v;
    double worst = 0;
    for (int rep = 0; rep < 3; ++rep) {
        for (const auto& ref : kRefs) {
            const auto t0 = Clock::now();
            (void)compile_file(testing::benchmark_path(ref.file));
            const double ms = seconds_since(t0) * 1000;
            worst = std::max(worst, ms);
            if (ms >= 100) {
                v.fail(std::string(ref.name) + " took " + std::to_string(ms) + " ms");
            }
        }
    }
    if (v.ok) {
        v.detail << "slowest end-to-end compile " << worst << " ms";
    }
    return v;
}

Verdict feedback_latency() {
    Verdict v;
    const TimingModel tm;
    for (auto [what, ticks] : {std::pair{"readout", tm.readcnt_delay_ticks}, std::pair{"broadcast", tm.bcast_delay_ticks},
                               std::pair{"barrier release", tm.barrier_release_ticks}}) {
        if (ticks * tm.tick_ns >= 100) {
            v.fail(std::string(what) + " delay " + std::to_string(ticks * tm.tick_ns) + " ns");
        }
    }
    double lo = 1e9;
    double hi = 0;
    std::size_t cycles = 0;
    for (const auto& ref : kRefs) {
        if (!ref.feedback) {
            continue;
        }
        const CompileResult r = compile_file(testing::benchmark_path(ref.file));
        std::vector<DetectionScript> scripts{DetectionScript::cyclic({3, 7})};
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            scripts.push_back(DetectionScript::poisson(seed, 4.0));
        }
        for (const auto& ds : scripts) {
            const SimTrace t = simulate(r.boards, r.table_map(), tm, ds);
            std::vector<LatencyRecord> lat;
            try {
                lat = measure_feedback_latency(t);
            } catch (const NoFeedbackCycleError&) {
                continue;  // this script never took the branch
            }
            for (const auto& l : lat) {
                ++cycles;
                if (l.latency_ns >= 700) {
                    v.fail(std::string(ref.name) + " cycle " + std::to_string(l.id) + ": " +
                           std::to_string(l.latency_ns) + " ns");
                }
                if (std::string(ref.file) == "active_feedback.json") {
                    lo = std::min(lo, l.latency_ns);
                    hi = std::max(hi, l.latency_ns);
                    if (l.latency_ns < 688 || l.latency_ns > 692) {
                        v.fail("active-feedback cycle " + std::to_string(l.id) + ": " + std::to_string(l.latency_ns) + " ns");
                    }
                }
            }
        }
    }
    if (cycles == 0) {
        v.fail("no feedback cycles measured");
    }
    if (v.ok) {
        v.detail << cycles << " taken-branch cycles; active-feedback " << lo << "-" << hi
                 << " ns; delays " << tm.readcnt_delay_ticks * tm.tick_ns << "/" << tm.bcast_delay_ticks * tm.tick_ns
                 << "/" << tm.barrier_release_ticks * tm.tick_ns << " ns";
    }
    return v;
}

Verdict scan_invariance() {
    Verdict v;
    const SeqProgram p = load_program(testing::benchmark_path("cool_freq_scan.json"));
    const ScanResult s = expand_scan(p);
    std::set<std::uint64_t> control;
    std::set<std::vector<std::uint8_t>> table_sets;
    for (const auto& pt : s.points) {
        control.insert(pt.control_hash);
        std::vector<std::uint8_t> all;
        for (const auto& [id, t] : pt.tables.boards) {
            const auto b = steptable_binary(t);
            all.insert(all.end(), b.begin(), b.end());
        }
        table_sets.insert(all);
        // Independently recompile the point and compare control words.
        const CompileResult r = compile(apply_scan_point(p, *p.scan, pt.value), CompileOptions{
                                                                                   .isolate_state = p.scan->state});
        for (const auto& [id, bp] : r.boards) {
            if (bp.words != s.base.boards.at(id).words) {
                v.fail("point " + pt.value + ": control words differ on " + id);
            }
        }
    }
    if (s.points.size() != 10) {
        v.fail(std::to_string(s.points.size()) + " points");
    }
    if (table_sets.size() != 10) {
        v.fail(std::to_string(table_sets.size()) + " distinct step-table sets");
    }
    if (control.size() != 1) {
        v.fail(std::to_string(control.size()) + " distinct control hashes");
    }
    if (v.ok) {
        v.detail << "10 points, 10 step-table sets, control hash " << hex64(*control.begin()) << " at every point";
    }
    return v;
}

Verdict ssa_oracle() {
    Verdict v;
    const auto t0 = Clock::now();
    std::size_t phis = 0;
    std::size_t max_blocks = 0;
    for (int seed = 0; seed < 1000; ++seed) {
        const Cfg cfg = build_cfg(testing::random_program(seed));
        max_blocks = std::max(max_blocks, cfg.blocks.size());
        if (cfg.blocks.size() > 64) {
            v.fail("seed " + std::to_string(seed) + " has " + std::to_string(cfg.blocks.size()) + " blocks");
        }
        const DomInfo dom = compute_dominators(cfg);
        const auto sets = testing::brute_dominators(cfg);
        const auto idom = testing::brute_idom(sets);
        for (BlockId b = 0; b < cfg.blocks.size(); ++b) {
            for (BlockId a = 0; a < cfg.blocks.size(); ++a) {
                if (dom.dominates(a, b) != sets[b].contains(a)) {
                    v.fail("seed " + std::to_string(seed) + ": dominance b" + std::to_string(a) + "/b" +
                           std::to_string(b));
                }
            }
            if (dom.idom[b] != idom[b]) {
                v.fail("seed " + std::to_string(seed) + ": idom of b" + std::to_string(b));
            }
        }
        const SsaCfg ssa = to_ssa(cfg, dom);
        if (ssa.phi_sites != testing::brute_phi_sites(cfg)) {
            v.fail("seed " + std::to_string(seed) + ": phi placement");
        }
        phis += ssa.phi_count;
    }
    const double s = seconds_since(t0);
    if (s >= 60) {
        v.fail("took " + std::to_string(s) + " s");
    }
    if (v.ok) {
        v.detail << "1000 programs (<= " << max_blocks << " blocks, " << phis << " phis) in " << s << " s";
    }
    return v;
}

void check_allocation(Verdict& v, const CompileResult& r, std::uint64_t seed, int scripts, const std::string& tag) {
    const auto& reg = r.alloc.allocation.reg;
    for (const auto& [a, ns] : testing::brute_interference(r.alloc.cfg)) {
        for (const auto& b : ns) {
            if (!reg.contains(a) || !reg.contains(b) || reg.at(a) == reg.at(b)) {
                v.fail(tag + ": " + a + " and " + b + " share a register");
            }
        }
    }
    for (int s = 0; s < scripts; ++s) {
        const std::string diff = testing::compare_with_interpreter(r, testing::script_for(seed, s));
        if (!diff.empty()) {
            v.fail(tag + " script " + std::to_string(s) + ": " + diff);
            return;
        }
    }
}

Verdict allocation_semantics() {
    Verdict v;
    std::size_t programs = 0;
    std::size_t spilled = 0;
    for (int seed = 0; seed < 1000; ++seed) {
        const CompileResult r = compile(testing::random_program(seed));
        check_allocation(v, r, seed, 100, "seed " + std::to_string(seed));
        ++programs;
    }
    // Spill-forcing synthetics: wider programs squeezed into 2 and 3 colours.
    testing::RandomProgramOptions wide;
    wide.max_stmts = 7;
    wide.user_vars = 10;
    for (int seed = 0; seed < 100; ++seed) {
        for (int regs : {4, 5}) {
            CompileOptions o;
            o.regs.total = regs;
            const CompileResult r = compile(testing::random_program(5000 + seed, wide), o);
            spilled += r.stats.spills > 0 ? 1 : 0;
            check_allocation(v, r, 5000 + seed, 100, "wide seed " + std::to_string(seed) + "/" + std::to_string(regs));
            ++programs;
        }
    }
    for (int regs : {4, 5, 6}) {
        CompileOptions o;
        o.regs.total = regs;
        const CompileResult r = compile_file(testing::benchmark_path("multi_var_feedback.json"), o);
        spilled += r.stats.spills > 0 ? 1 : 0;
        check_allocation(v, r, 11, 100, "multi-var/" + std::to_string(regs));
        ++programs;
    }
    if (spilled < 50) {
        v.fail("only " + std::to_string(spilled) + " synthetics spilled");
    }
    if (v.ok) {
        v.detail << programs << " programs x 100 scripts (" << spilled << " with spills) match the interpreter";
    }
    return v;
}

Verdict determinism() {
    Verdict v;
    for (const auto& ref : kRefs) {
        std::vector<std::vector<Artifact>> arts;
        std::vector<std::string> traces;
        for (int i = 0; i < 3; ++i) {
            const CompileResult r = compile_file(testing::benchmark_path(ref.file));
            arts.push_back(render_artifacts(r, parse_emit_list("all,liveness")));
            traces.push_back(trace_jsonl(
                simulate(r.boards, r.table_map(), TimingModel{}, DetectionScript::poisson(17, 4.0))));
        }
        for (int i = 1; i < 3; ++i) {
            if (arts[i].size() != arts[0].size() || traces[i] != traces[0]) {
                v.fail(std::string(ref.name) + ": run " + std::to_string(i) + " differs");
                continue;
            }
            for (std::size_t k = 0; k < arts[0].size(); ++k) {
                if (arts[i][k].bytes != arts[0][k].bytes) {
                    v.fail(std::string(ref.name) + ": " + arts[0][k].file + " differs");
                }
            }
        }
    }
    if (v.ok) {
        v.detail << "6 benchmarks x 3 runs: artifacts and traces byte-identical";
    }
    return v;
}

Verdict lockstep() {
    Verdict v;
    std::size_t injected = 0;
    for (std::size_t i = 0; i < kRefs.size(); ++i) {
        const CompileResult r = compile_file(testing::benchmark_path(kRefs[i].file));
        const SimTrace clean = simulate(r.boards, r.table_map(), TimingModel{}, bench_script());
        if (const auto rep = assert_lockstep(clean); !rep.ok) {
            v.fail(std::string(kRefs[i].name) + ": " + rep.message);
        }
        // Lengthen one entry on one board; the first step using it must be
        // the reported ordinal.
        for (const auto& [state, idx] : r.tables.boards.at("ttl0").index) {
            auto tables = r.table_map();
            tables.at("ttl0").entries[idx].duration_ticks += 3;
            const SimTrace t = simulate(r.boards, tables, TimingModel{}, bench_script());
            const auto& steps = t.board("ttl0").steps;
            const auto first =
                std::find_if(steps.begin(), steps.end(), [&](const StepRecord& s) { return s.index == idx; });
            if (first == steps.end()) {
                continue;
            }
            ++injected;
            const auto rep = assert_lockstep(t);
            if (rep.ok || rep.ordinal != first->ordinal) {
                v.fail(std::string(kRefs[i].name) + " fault in " + state + ": reported " +
                       (rep.ordinal ? std::to_string(*rep.ordinal) : "none") + ", expected " +
                       std::to_string(first->ordinal));
            }
        }
    }
    if (v.ok) {
        v.detail << "6 benchmarks in lockstep; " << injected << " injected duration faults located at their ordinal";
    }
    return v;
}

Verdict protocol_safety() {
    Verdict v;
    std::size_t traces = 0;
    std::size_t cycles = 0;
    for (const auto& ref : kRefs) {
        const CompileResult r = compile_file(testing::benchmark_path(ref.file));
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const SimTrace t = simulate(r.boards, r.table_map(), TimingModel{}, DetectionScript::poisson(seed, 4.0));
            ++traces;
            cycles += t.cycles.size();
            if (!t.protocol_violations.empty()) {
                v.fail(std::string(ref.name) + ": " + t.protocol_violations.front());
            }
        }
    }
    for (int seed = 0; seed < 200; ++seed) {
        const CompileResult r = compile(testing::random_program(seed));
        const SimTrace t = simulate(r.boards, r.table_map(), TimingModel{}, testing::script_for(seed, 0));
        ++traces;
        cycles += t.cycles.size();
        if (!t.protocol_violations.empty()) {
            v.fail("seed " + std::to_string(seed) + ": " + t.protocol_violations.front());
        }
    }

    // Negative: both boards reach a barrier, nobody broadcasts.
    auto make = [](const std::string& id, bool bcast, std::vector<Op> ops) {
        BoardProgram bp;
        bp.board_id = id;
        bp.role = bcast ? BoardKind::TTL : BoardKind::DDS;
        bp.broadcaster = bcast;
        for (Op op : ops) {
            AsmLine l;
            l.instr.op = op;
            l.instr.rd = op == Op::RECV ? 1 : 0;
            bp.lines.push_back(l);
        }
        assemble(bp);
        return bp;
    };
    std::map<std::string, BoardProgram> progs{
        {"dds0", make("dds0", false, {Op::BARRIER, Op::RECV, Op::HALT})},
        {"ttl0", make("ttl0", true, {Op::BARRIER, Op::HALT})},
    };
    std::map<std::string, StepTable> tables{{"dds0", StepTable{"dds0"}}, {"ttl0", StepTable{"ttl0"}}};
    bool deadlocked = false;
    try {
        simulate(progs, tables, TimingModel{}, DetectionScript::scripted({}));
    } catch (const DeadlockError&) {
        deadlocked = true;
    }
    if (!deadlocked) {
        v.fail("barrier without broadcast did not deadlock");
    }
    if (v.ok) {
        v.detail << traces << " traces, " << cycles << " broadcast cycles, no early RECV; unmatched BARRIER raises "
                 << "DeadlockError";
    }
    return v;
}

}  // namespace
}  // namespace bell

int main() {
    using bell::Verdict;
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"compactness exactness", bell::compactness},
        {"compilation sanity bands", bell::sanity_bands},
        {"compile time < 100 ms", bell::compile_time},
        {"feedback latency", bell::feedback_latency},
        {"scan invariance", bell::scan_invariance},
        {"ssa oracle", bell::ssa_oracle},
        {"allocation validity + semantics", bell::allocation_semantics},
        {"determinism", bell::determinism},
        {"lockstep", bell::lockstep},
        {"protocol safety", bell::protocol_safety},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v.fail(std::string("exception: ") + e.what());
        }
        failed += v.ok ? 0 : 1;
        std::printf("%s  %s: %s\n", v.ok ? "PASS" : "FAIL", name, v.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
