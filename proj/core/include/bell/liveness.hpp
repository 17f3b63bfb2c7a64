#pragma once

#include <map>
#include <set>
#include <vector>

#include "bell/mir.hpp"
#include "bell/ssa.hpp"

namespace bell {

struct OutOfSsaOptions {
    bool split_critical_edges = true;
};

// Replaces phis by copies on incoming edges, splitting critical edges.
// Phis whose value is never used (transitively) are dropped instead of
// copied. Copy cycles are broken with a `%pcN` temporary.
Cfg out_of_ssa(const SsaCfg& ssa, const OutOfSsaOptions& options = {});

struct LiveInfo {
    std::vector<std::set<Var>> live_in;
    std::vector<std::set<Var>> live_out;
    int iterations = 0;
};

// Backward dataflow over a phi-free CFG, iterated to the fixed point.
LiveInfo compute_liveness(const Cfg& cfg);

// Element i is the set of variables live immediately after instruction i of
// `block` (the last one includes the terminator's uses).
std::vector<std::set<Var>> live_after_each(const Cfg& cfg, const LiveInfo& live, BlockId block);

struct InterferenceGraph {
    std::vector<Var> nodes;  // sorted
    std::map<Var, std::set<Var>> adj;
    std::map<Var, double> cost;              // sum of 10^depth over defs and uses
    std::map<Var, std::set<Var>> copy_pairs;  // copy-related partners
    std::size_t max_pressure = 0;            // most variables live at one point

    bool interferes(const Var& a, const Var& b) const;
    std::size_t edge_count() const;
    std::size_t degree(const Var& v) const;
};

// Edge (a, b) iff b is live immediately after an instruction defining a.
InterferenceGraph build_interference(const Cfg& cfg, const LiveInfo& live);

std::string dump_liveness(const Cfg& cfg, const LiveInfo& live);
std::string dump_interference(const InterferenceGraph& g);

}  // namespace bell
