#pragma once

#include <map>
#include <set>
#include <vector>

#include "bell/mir.hpp"

namespace bell {

struct DomInfo {
    std::vector<BlockId> idom;  // idom[entry] == entry
    std::vector<std::set<BlockId>> frontier;
    std::vector<std::vector<BlockId>> children;  // dominator tree, ascending
    std::vector<BlockId> rpo;                    // reverse post-order

    bool dominates(BlockId a, BlockId b) const;
};

// Throws UnreachableBlockError if any block is unreachable from the entry.
DomInfo compute_dominators(const Cfg& cfg);

// Iterated dominance frontier of a set of blocks.
std::set<BlockId> iterated_frontier(const DomInfo& dom, const std::set<BlockId>& blocks);

struct SsaCfg {
    Cfg cfg;  // versioned variables "name.N", phis populated
    DomInfo dom;
    std::map<std::string, std::set<BlockId>> phi_sites;  // base name -> blocks
    std::size_t var_count = 0;      // distinct base variables carried in SSA
    std::size_t version_count = 0;  // distinct versioned definitions
    std::size_t phi_count = 0;
};

// Minimal SSA: a phi for variable v at every block in IDF(defs(v)).
// Throws UseBeforeDefError when some path from the entry reaches a use
// without passing a definition.
SsaCfg to_ssa(const Cfg& cfg, const DomInfo& dom);

std::string dump_ssa(const SsaCfg& ssa, const SeqProgram* program = nullptr);

}  // namespace bell
