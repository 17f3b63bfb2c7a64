#pragma once

// Deliberately naive reference computations. Nothing here shares code with
// the compiler beyond the IR containers.

#include <map>
#include <set>
#include <vector>

#include "bell/mir.hpp"

namespace bell::testing {

// dom[b] = every block a such that deleting a disconnects b from the entry
// (plus b itself).
std::vector<std::set<BlockId>> brute_dominators(const Cfg& cfg);

// Immediate dominator derived from the dominator sets: the strict dominator
// that every other strict dominator also dominates.
std::vector<BlockId> brute_idom(const std::vector<std::set<BlockId>>& dom);

// Dominance frontier straight from the definition, then iterated to a fixed
// point over the blocks defining each variable.
std::vector<std::set<BlockId>> brute_frontier(const Cfg& cfg, const std::vector<std::set<BlockId>>& dom);
std::map<Var, std::set<BlockId>> brute_phi_sites(const Cfg& cfg);

// Variable v is live after instruction k of block b iff some path from
// that point reaches a use of v before any redefinition. Index k ==
// instrs.size() means "before the terminator" is not used; the vector has
// one entry per instruction.
std::vector<std::set<Var>> brute_live_after(const Cfg& cfg, BlockId b);

// Edge (a, b) iff b is live right after an instruction defining a.
std::map<Var, std::set<Var>> brute_interference(const Cfg& cfg);

}  // namespace bell::testing
