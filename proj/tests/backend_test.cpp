#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bell/errors.hpp"
#include "bell/isa.hpp"
#include "bell/pipeline.hpp"
#include "bell/steptable.hpp"
#include "support/oracles.hpp"
#include "support/random_program.hpp"
#include "support/semantics.hpp"

namespace bell {
namespace {

using testing::benchmark_path;
using testing::two_board_config;

StateDecl ttl_state(const std::string& name, std::int64_t ticks, std::uint32_t mask) {
    StateDecl s;
    s.name = name;
    s.duration_ticks = ticks;
    s.ttl_out["ttl0"] = mask;
    return s;
}

// Seven values live at once (a 7-clique under six colours) while a loop
// accumulates into `acc`.
SeqProgram seven_live_values() {
    ProgramBuilder b(two_board_config(), "k7.py");
    b.state(ttl_state("a", 10, 1));
    for (int i = 0; i < 6; ++i) {
        b.assign("a" + std::to_string(i), ArithExpr::constant(100 + i));
    }
    b.assign("acc", ArithExpr::constant(0));
    b.loop(5).play("a").assign("acc", ArithExpr::add(ArithExpr::variable("acc"), ArithExpr::constant(3))).end();
    ArithExpr sum = ArithExpr::variable("acc");
    for (int i = 0; i < 6; ++i) {
        sum = ArithExpr::add(sum, ArithExpr::variable("a" + std::to_string(i)));
    }
    b.assign("total", sum);
    return b.build();
}

TEST(RegAlloc, RegisterFileBounds) {
    EXPECT_THROW((RegFile{3}).validate(), AllocationError);
    EXPECT_THROW((RegFile{33}).validate(), AllocationError);
    EXPECT_NO_THROW((RegFile{4}).validate());
    EXPECT_EQ(RegFile{}.colors(), 6);
    EXPECT_EQ(RegFile{}.scratch(), 7);
}

TEST(RegAlloc, SevenCliqueSpillsCheapValueNotLoopCarried) {
    const CompileResult r = compile(seven_live_values());
    EXPECT_GE(r.stats.max_pressure, 7u);
    EXPECT_GE(r.stats.spills, 1u);
    for (const auto& v : r.alloc.allocation.spilled) {
        EXPECT_EQ(base_name(v).rfind("a", 0), 0u) << v << " should not be spilled";
        EXPECT_NE(base_name(v), "acc");
    }
    for (int s = 0; s < 20; ++s) {
        EXPECT_EQ(testing::compare_with_interpreter(r, testing::script_for(7, s)), "");
    }
}

TEST(RegAlloc, SpillCodeLoadsBeforeUseAndStoresAfterDef) {
    CompileOptions o;
    o.regs.total = 4;
    const CompileResult r = compile(seven_live_values(), o);
    ASSERT_FALSE(r.alloc.allocation.spilled.empty());
    const auto& slots = r.alloc.allocation.slot;
    for (const auto& b : r.alloc.cfg.blocks) {
        for (std::size_t k = 0; k < b.instrs.size(); ++k) {
            const Instr& i = b.instrs[k];
            if (i.kind == Instr::Kind::Load) {
                ASSERT_LT(k + 1, b.instrs.size() + 1);
                EXPECT_NE(i.dst.find(".s"), std::string::npos);
            }
            if (i.kind == Instr::Kind::Store) {
                ASSERT_GT(k, 0u);
                EXPECT_EQ(b.instrs[k - 1].def().value_or(i.a.var()), i.a.var());
            }
            for (const auto& u : i.uses()) {
                EXPECT_FALSE(r.alloc.allocation.spilled.contains(u)) << u << " read from a register after spilling";
            }
        }
    }
    for (const auto& [v, s] : slots) {
        EXPECT_TRUE(r.alloc.allocation.spilled.contains(v));
        EXPECT_GE(s, 0);
    }
    EXPECT_EQ(testing::compare_with_interpreter(r, testing::script_for(1, 1)), "");
}

TEST(RegAlloc, FrameOverflowIsReported) {
    CompileOptions o;
    o.regs.total = 4;
    o.frame_slots = 1;
    EXPECT_THROW(compile(seven_live_values(), o), FrameOverflowError);
}

TEST(RegAlloc, VerifyRejectsSharedRegister) {
    InterferenceGraph g;
    g.nodes = {"a", "b"};
    g.adj["a"] = {"b"};
    g.adj["b"] = {"a"};
    Allocation a;
    a.reg = {{"a", 1}, {"b", 1}};
    EXPECT_THROW(verify_allocation(g, a, RegFile{}), AllocationError);
    a.reg["b"] = 7;  // scratch
    EXPECT_THROW(verify_allocation(g, a, RegFile{}), AllocationError);
    a.reg["b"] = 2;
    EXPECT_NO_THROW(verify_allocation(g, a, RegFile{}));
}

TEST(RegAlloc, BenchmarksAllocateWithoutSpills) {
    for (const char* f : {"simple_pulse.json", "variable_readout.json", "active_feedback.json", "nested_loop.json",
                          "multi_var_feedback.json", "while_threshold.json"}) {
        const CompileResult r = compile_file(benchmark_path(f));
        EXPECT_EQ(r.stats.spills, 0u) << f;
        EXPECT_EQ(r.stats.alloc_rounds, 1) << f;
    }
}

TEST(RegAlloc, MultiVarFeedbackSpillsWhenColoursShrink) {
    CompileOptions o;
    o.regs.total = 5;
    const CompileResult r = compile_file(benchmark_path("multi_var_feedback.json"), o);
    EXPECT_GT(r.stats.max_pressure, 3u);
    EXPECT_GT(r.stats.spills, 0u);
    for (int s = 0; s < 20; ++s) {
        EXPECT_EQ(testing::compare_with_interpreter(r, testing::script_for(11, s)), "");
    }
}

TEST(Isa, ReferenceEncodings) {
    EXPECT_EQ(encode({Op::HALT}), kHaltWord);
    EXPECT_EQ(encode({Op::ADDI, 1, 0, 0, 5}), 0x00500093u);
    EXPECT_EQ(encode({Op::ADD, 3, 1, 2, 0}), 0x002081B3u);
    EXPECT_EQ(encode({Op::SUB, 3, 1, 2, 0}), 0x402081B3u);
    EXPECT_EQ(encode({Op::LUI, 7, 0, 0, 1}), 0x000013B7u);
    EXPECT_EQ(encode({Op::STEP, 0, 0, 0, 4}), 0x0040000Bu);
    EXPECT_EQ(decode(0x00500093u), (MachineInstr{Op::ADDI, 1, 0, 0, 5}));
    EXPECT_EQ(disasm(decode(0x00500093u)), "addi x1, x0, 5");
}

TEST(Isa, RangeChecks) {
    EXPECT_THROW(encode({Op::ADDI, 1, 0, 0, 2048}), ImmediateOverflowError);
    EXPECT_THROW(encode({Op::ADDI, 32, 0, 0, 1}), ImmediateOverflowError);
    EXPECT_THROW(encode({Op::STEP, 0, 0, 0, kStepIndexMax + 1}), ImmediateOverflowError);
    EXPECT_THROW(encode({Op::BEQ, 0, 1, 2, kBranchWordsMax + 1}), OffsetOverflowError);
    EXPECT_THROW(encode({Op::JAL, 0, 0, 0, kJumpWordsMin - 1}), OffsetOverflowError);
    EXPECT_THROW(encode({Op::WAITHOST, 0, 0, 0, kTagMax + 1}), ImmediateOverflowError);
    EXPECT_NO_THROW(encode({Op::BEQ, 0, 1, 2, kBranchWordsMin}));
    EXPECT_NO_THROW(encode({Op::WAITHOST, 0, 0, 0, kTagMax}));
}

MachineInstr random_instr(std::mt19937_64& rng) {
    auto pick = [&](std::int64_t lo, std::int64_t hi) {
        return static_cast<std::int32_t>(std::uniform_int_distribution<std::int64_t>(lo, hi)(rng));
    };
    MachineInstr m;
    m.op = static_cast<Op>(pick(0, static_cast<int>(Op::HALT)));
    m.rd = static_cast<std::uint8_t>(pick(0, 31));
    m.rs1 = static_cast<std::uint8_t>(pick(0, 31));
    m.rs2 = static_cast<std::uint8_t>(pick(0, 31));
    switch (m.op) {
    case Op::BEQ: case Op::BNE: case Op::BLT: case Op::BGE: m.imm = pick(kBranchWordsMin, kBranchWordsMax); break;
    case Op::JAL: m.imm = pick(kJumpWordsMin, kJumpWordsMax); break;
    case Op::LUI: m.imm = pick(0, (1 << 20) - 1); break;
    case Op::STEP: m.imm = pick(0, kStepIndexMax); break;
    case Op::READCNT: m.imm = pick(0, 4095); break;
    case Op::WAITHOST: m.imm = pick(0, kTagMax); break;
    default: m.imm = pick(kImm12Min, kImm12Max); break;
    }
    return canonical(m);
}

TEST(Isa, EncodeDecodeRoundTripFuzz) {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 200000; ++i) {
        const MachineInstr m = random_instr(rng);
        const std::uint32_t w = encode(m);
        ASSERT_EQ(decode(w), m) << disasm(m);
        ASSERT_EQ(parse_mnemonic(mnemonic(m.op)), m.op);
    }
}

TEST(Isa, DecodeAcceptsOnlyCanonicalWords) {
    std::mt19937_64 rng(7);
    std::size_t accepted = 0;
    for (int i = 0; i < 500000; ++i) {
        const auto w = static_cast<std::uint32_t>(rng());
        try {
            const MachineInstr m = decode(w);
            ++accepted;
            ASSERT_EQ(encode(m), w) << std::hex << w;
        } catch (const DecodeError&) {
        }
    }
    EXPECT_GT(accepted, 0u);
}

TEST(Isa, SplitConstantReassembles) {
    std::mt19937_64 rng(3);
    for (std::int64_t v : {0LL, 1LL, -1LL, 2047LL, 2048LL, -2048LL, -2049LL, 0x7fffffffLL, -0x80000000LL}) {
        const HiLo s = split_constant(static_cast<std::int32_t>(v));
        EXPECT_EQ(static_cast<std::int32_t>((static_cast<std::uint32_t>(s.hi) << 12) + static_cast<std::uint32_t>(s.lo)),
                  static_cast<std::int32_t>(v));
        EXPECT_TRUE(fits_imm12(s.lo));
    }
    for (int i = 0; i < 10000; ++i) {
        const auto v = static_cast<std::int32_t>(rng());
        const HiLo s = split_constant(v);
        ASSERT_EQ(static_cast<std::int32_t>((static_cast<std::uint32_t>(s.hi) << 12) + static_cast<std::uint32_t>(s.lo)),
                  v);
        ASSERT_GE(s.hi, 0);
        ASSERT_LT(s.hi, 1 << 20);
    }
}

TEST(StepTable, FixedPointWords) {
    const DdsWord w = to_dds_word(DdsSetting{"200000000", "0.8", "1.5707963"});
    EXPECT_EQ(w.freq_word, static_cast<std::uint32_t>(std::llround(0.2 * 4294967296.0)));
    EXPECT_EQ(w.amp_word, static_cast<std::uint32_t>(std::llround(0.8 * 16383)));
    EXPECT_EQ(w.phase_word, 16384u);
    EXPECT_EQ(to_dds_word(DdsSetting{"0", "1", "0"}).amp_word, 16383u);
    EXPECT_THROW(to_dds_word(DdsSetting{"1000000000", "0", "0"}), ValidationError);
}

TEST(StepTable, ActiveFeedbackEntriesAreGlobal) {
    const SeqProgram p = load_program(benchmark_path("active_feedback.json"));
    const StepTables t = compile_steptables(p);
    EXPECT_EQ(t.entry_count(), 6u);
    ASSERT_EQ(t.boards.size(), 2u);
    const auto& dds = t.boards.at("dds0");
    const auto& ttl = t.boards.at("ttl0");
    ASSERT_EQ(dds.entries.size(), ttl.entries.size());
    for (std::size_t i = 0; i < dds.entries.size(); ++i) {
        EXPECT_EQ(dds.entries[i].duration_ticks, ttl.entries[i].duration_ticks) << i;
    }
    // First-play order.
    EXPECT_EQ(dds.index.at("doppler"), 0u);
    EXPECT_EQ(dds.index.at("cool"), 5u);
}

TEST(StepTable, IdenticalHardwareSharesAnEntry) {
    ProgramBuilder b(two_board_config());
    b.state(ttl_state("x", 10, 1)).state(ttl_state("y", 10, 1)).state(ttl_state("z", 12, 1));
    b.play("x").play("y").play("z").play("x");
    const StepTables t = compile_steptables(b.build());
    EXPECT_EQ(t.entry_count(), 2u);
    EXPECT_EQ(t.state_entry[0], t.state_entry[1]);
    EXPECT_NE(t.state_entry[0], t.state_entry[2]);
    StepTableOptions o;
    o.isolate_state = "y";
    EXPECT_EQ(compile_steptables(b.build(), o).entry_count(), 3u);
}

TEST(StepTable, BinaryRoundTrip) {
    const SeqProgram p = load_program(benchmark_path("multi_var_feedback.json"));
    const StepTables t = compile_steptables(p);
    for (const auto& [id, table] : t.boards) {
        const auto bytes = steptable_binary(table);
        ASSERT_GE(bytes.size(), 16u);
        EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "BSTB");
        StepTable back = read_steptable_binary(bytes, id);
        back.index = table.index;  // names live only in the JSON sidecar
        EXPECT_EQ(back, table) << id;
        auto truncated = bytes;
        truncated.pop_back();
        EXPECT_THROW(read_steptable_binary(truncated, id), DecodeError);
    }
}

TEST(StepTable, IterationCountsAndCompactness) {
    const char* files[] = {"simple_pulse.json", "variable_readout.json", "active_feedback.json",
                           "nested_loop.json", "multi_var_feedback.json", "while_threshold.json"};
    const std::optional<std::uint64_t> n[] = {100, 50, 20, 1000, 100, std::nullopt};
    for (int i = 0; i < 6; ++i) {
        const SeqProgram p = load_program(benchmark_path(files[i]));
        EXPECT_EQ(iteration_count(p), n[i]) << files[i];
        const CompactnessRow row = compactness_report(files[i], p, compile_steptables(p));
        if (row.naive_configs) {
            EXPECT_EQ(*row.naive_configs, *row.iterations * row.entries);
            EXPECT_EQ(*row.reduction, *row.naive_configs / row.entries);
        } else {
            EXPECT_FALSE(row.reduction);
        }
    }
    EXPECT_NE(format_compactness({compactness_report("w", load_program(benchmark_path("while_threshold.json")),
                                                     compile_steptables(load_program(
                                                         benchmark_path("while_threshold.json"))))})
                  .find("---"),
              std::string::npos);
}

}  // namespace
}  // namespace bell
