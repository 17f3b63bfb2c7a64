#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bell/pipeline.hpp"
#include "bell/sim.hpp"

namespace bell::testing {

std::filesystem::path programs_dir();
std::filesystem::path benchmark_path(const std::string& file);

// Runs the interpreter on the pre-SSA CFG and the simulator on the board
// programs with identical detection scripts. Returns an empty string when
// every board's definition log, final variables and played entries agree
// with the interpreter, else a description of the first disagreement.
std::string compare_with_interpreter(const CompileResult& r, const DetectionScript& ds,
                                     std::size_t max_instructions = 2'000'000);

// Poisson script whose seed is derived from (program seed, script number).
DetectionScript script_for(std::uint64_t program_seed, int n);

}  // namespace bell::testing
