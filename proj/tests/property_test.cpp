// Randomized structured programs checked against brute-force oracles.

#include <gtest/gtest.h>

#include "bell/cfg.hpp"
#include "bell/errors.hpp"
#include "bell/interp.hpp"
#include "bell/pipeline.hpp"
#include "bell/ssa.hpp"
#include "support/oracles.hpp"
#include "support/random_program.hpp"
#include "support/semantics.hpp"

namespace bell {
namespace {

using testing::brute_dominators;
using testing::brute_idom;
using testing::brute_interference;
using testing::brute_phi_sites;
using testing::random_program;

constexpr int kCorpus = 1000;

TEST(RandomCorpus, ProgramsValidateAndStaySmall) {
    for (int seed = 0; seed < kCorpus; ++seed) {
        const SeqProgram p = random_program(seed);
        ASSERT_TRUE(validate_variables(p).empty()) << "seed " << seed;
        const Cfg cfg = build_cfg(p);
        ASSERT_LE(cfg.blocks.size(), 64u) << "seed " << seed;
    }
}

TEST(RandomCorpus, DominatorsMatchBruteForce) {
    for (int seed = 0; seed < kCorpus; ++seed) {
        const Cfg cfg = build_cfg(random_program(seed));
        const DomInfo dom = compute_dominators(cfg);
        const auto sets = brute_dominators(cfg);
        const auto idom = brute_idom(sets);
        for (BlockId b = 0; b < cfg.blocks.size(); ++b) {
            for (BlockId a = 0; a < cfg.blocks.size(); ++a) {
                ASSERT_EQ(dom.dominates(a, b), sets[b].contains(a)) << "seed " << seed << " b" << a << " dom b" << b;
            }
            ASSERT_EQ(dom.idom[b], idom[b]) << "seed " << seed << " block " << b;
        }
    }
}

TEST(RandomCorpus, PhiPlacementMatchesIteratedFrontierOracle) {
    for (int seed = 0; seed < kCorpus; ++seed) {
        const Cfg cfg = build_cfg(random_program(seed));
        const SsaCfg ssa = to_ssa(cfg, compute_dominators(cfg));
        ASSERT_EQ(ssa.phi_sites, brute_phi_sites(cfg)) << "seed " << seed;
    }
}

TEST(RandomCorpus, SsaHasOneDefinitionPerVersion) {
    for (int seed = 0; seed < kCorpus; seed += 3) {
        const Cfg cfg = build_cfg(random_program(seed));
        const SsaCfg ssa = to_ssa(cfg, compute_dominators(cfg));
        std::set<Var> seen;
        for (const auto& b : ssa.cfg.blocks) {
            for (const auto& phi : b.phis) {
                ASSERT_TRUE(seen.insert(phi.dst).second) << "seed " << seed << " " << phi.dst;
            }
            for (const auto& i : b.instrs) {
                if (auto d = i.def()) {
                    ASSERT_TRUE(seen.insert(*d).second) << "seed " << seed << " " << *d;
                }
            }
        }
    }
}

TEST(RandomCorpus, InterferenceMatchesBruteForceLiveness) {
    for (int seed = 0; seed < kCorpus; seed += 2) {
        const CompileResult r = compile(random_program(seed));
        const Cfg& final_cfg = r.alloc.cfg;
        const auto want = brute_interference(final_cfg);
        for (const auto& [v, ns] : want) {
            ASSERT_EQ(r.alloc.graph.adj.at(v), ns) << "seed " << seed << " var " << v;
        }
    }
}

// No interfering pair shares a register, checked against the brute-force
// graph rather than the allocator's own.
void expect_valid_colouring(const CompileResult& r, std::uint64_t seed) {
    const auto& reg = r.alloc.allocation.reg;
    for (const auto& [v, ns] : brute_interference(r.alloc.cfg)) {
        ASSERT_TRUE(reg.contains(v)) << "seed " << seed << " " << v << " uncoloured";
        ASSERT_GE(reg.at(v), 1);
        ASSERT_LT(reg.at(v), r.regs.scratch());
        for (const auto& w : ns) {
            ASSERT_NE(reg.at(v), reg.at(w)) << "seed " << seed << " " << v << " and " << w;
        }
    }
}

TEST(RandomCorpus, AllocationIsValidAndPreservesSemantics) {
    for (int seed = 0; seed < kCorpus; ++seed) {
        const CompileResult r = compile(random_program(seed));
        expect_valid_colouring(r, seed);
        for (int s = 0; s < 100; ++s) {
            const std::string diff = testing::compare_with_interpreter(r, testing::script_for(seed, s));
            ASSERT_EQ(diff, "") << "seed " << seed << " script " << s;
        }
    }
}

TEST(RandomCorpus, TightRegisterFilesSpillAndStayCorrect) {
    testing::RandomProgramOptions o;
    o.max_stmts = 7;
    o.user_vars = 10;
    std::size_t spilled_programs = 0;
    for (int seed = 0; seed < 150; ++seed) {
        for (int regs : {4, 5}) {
            CompileOptions co;
            co.regs.total = regs;
            const CompileResult r = compile(random_program(seed, o), co);
            spilled_programs += r.stats.spills > 0 ? 1 : 0;
            expect_valid_colouring(r, seed);
            for (int s = 0; s < 20; ++s) {
                const std::string diff = testing::compare_with_interpreter(r, testing::script_for(seed, s));
                ASSERT_EQ(diff, "") << "seed " << seed << " regs " << regs << " script " << s;
            }
        }
    }
    EXPECT_GT(spilled_programs, 25u);
}

}  // namespace
}  // namespace bell
