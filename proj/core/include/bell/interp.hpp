#pragma once

// Reference semantics for the mid-level IR: unbounded virtual registers,
// 32-bit wrapping arithmetic, phis as parallel copies on edge entry. Used as
// the oracle the board simulation is checked against.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bell/detection.hpp"
#include "bell/mir.hpp"

namespace bell {

struct DefRecord {
    std::string var;  // base name
    std::int32_t value = 0;

    bool operator==(const DefRecord&) const = default;
};

struct InterpResult {
    std::vector<std::size_t> plays;  // program state indices in play order
    std::vector<DefRecord> defs;     // user-variable definitions in order
    std::map<std::string, std::int32_t> final_vars;
    std::size_t counter_reads = 0;
};

// Throws MaxTicksExceeded after `max_instructions`, UseBeforeDefError on
// reads of undefined variables.
InterpResult interpret(const Cfg& cfg, DetectionScript ds, std::size_t max_instructions = 10'000'000);

std::int32_t wrap_add(std::int32_t a, std::int32_t b);
std::int32_t wrap_sub(std::int32_t a, std::int32_t b);

}  // namespace bell
