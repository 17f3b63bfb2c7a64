#pragma once

#include <vector>

#include "bell/mir.hpp"
#include "bell/program.hpp"

namespace bell {

// Lowers the node tree into basic blocks. Bounded loops become a counter
// (`%loopN`, counting up from 0) with a signed less-than exit test and a back
// edge; every if gets a materialized merge block; each read_ttl occupies its
// own synchronization block [barrier; readcnt; broadcast].
//
// Unreachable blocks cannot arise from structured input, but any found are
// appended to `warnings` as dead-code diagnostics.
Cfg build_cfg(const SeqProgram& program, std::vector<Diagnostic>* warnings = nullptr);

// Blocks not reachable from the entry block, ascending.
std::vector<BlockId> detect_dead_code(const Cfg& cfg);

}  // namespace bell
