#pragma once

// Random structured programs over two boards (dds0 + ttl0 with counters).
// Every generated program validates cleanly: conditions and right-hand
// sides only read variables defined on every path, and while loops are
// driven by a dedicated counter so they always terminate.

#include <cstdint>

#include "bell/program.hpp"

namespace bell::testing {

struct RandomProgramOptions {
    int max_depth = 3;
    int max_stmts = 5;         // per node list
    int user_vars = 6;         // v0..v(n-1)
    std::int64_t max_loop = 3;
    bool allow_while = true;
    bool allow_wait = true;
    int max_blocks = 64;       // upper bound on the lowered CFG
};

SystemConfig two_board_config();

SeqProgram random_program(std::uint64_t seed, const RandomProgramOptions& options = {});

}  // namespace bell::testing
