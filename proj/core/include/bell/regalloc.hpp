#pragma once

#include <map>
#include <set>
#include <string>

#include "bell/liveness.hpp"
#include "bell/mir.hpp"

namespace bell {

// x0 reads as zero and the highest register is reserved as codegen scratch;
// everything in between is colorable.
struct RegFile {
    int total = 8;

    int zero() const { return 0; }
    int scratch() const { return total - 1; }
    int colors() const { return total - 2; }

    // Rejects files too small to hold both operands of a binary op.
    void validate() const;
};

struct Allocation {
    std::map<Var, int> reg;     // colored variables -> x1..x(total-2)
    std::set<Var> spilled;
    std::map<Var, int> slot;    // spilled variables -> frame slot
    std::size_t spill_count = 0;
    std::size_t max_pressure = 0;
    int rounds = 0;

    bool operator==(const Allocation&) const = default;
};

// One Briggs coloring pass: simplify low-degree nodes first, push the
// minimum cost/degree node optimistically when blocked, and decide spills
// only in the select phase. Copy-related partners bias color choice.
// Variables containing ".s" (spill temporaries) are never chosen to spill
// while another candidate exists.
Allocation allocate(const InterferenceGraph& g, const RegFile& rf);

inline constexpr int kDefaultFrameSlots = 64;

// Rewrites every use of a spilled variable as a load into a fresh temporary
// just before the instruction and every definition as a store right after.
// New slots are assigned starting after those already present in `slots`.
Cfg insert_spill_code(const Cfg& cfg, const Allocation& a, std::map<Var, int>& slots,
                      int frame_slots = kDefaultFrameSlots);

// Convenience overload starting from an empty slot map.
Cfg insert_spill_code(const Cfg& cfg, const Allocation& a, int frame_slots = kDefaultFrameSlots);

struct AllocatedProgram {
    Cfg cfg;  // spill code inserted, every variable colored
    Allocation allocation;
    InterferenceGraph graph;  // graph of the final round
};

// allocate -> spill -> rebuild until no spills, at most 8 rounds.
AllocatedProgram allocate_registers(const Cfg& cfg, const RegFile& rf, int frame_slots = kDefaultFrameSlots);

// Throws AllocationError if interfering variables share a register or a
// variable has no home.
void verify_allocation(const InterferenceGraph& g, const Allocation& a, const RegFile& rf);

std::string dump_allocation(const Allocation& a, const RegFile& rf);

}  // namespace bell
