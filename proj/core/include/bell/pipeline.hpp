#pragma once

// The six compiler stages end to end, plus the artifacts each one leaves
// behind for inspection.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bell/cfg.hpp"
#include "bell/codegen.hpp"
#include "bell/liveness.hpp"
#include "bell/regalloc.hpp"
#include "bell/ssa.hpp"
#include "bell/steptable.hpp"

namespace bell {

struct CompileOptions {
    RegFile regs;
    FixedPoint fixed_point;
    bool split_critical_edges = true;
    int frame_slots = kDefaultFrameSlots;
    std::optional<std::string> isolate_state;  // see StepTableOptions
};

struct StageTiming {
    std::string stage;
    double ms = 0;
};

struct CompileStats {
    std::size_t cfg_blocks = 0;
    std::size_t ssa_vars = 0;
    std::size_t ssa_versions = 0;
    std::size_t phis = 0;
    std::size_t asm_instructions = 0;  // broadcaster board, else the longest
    std::map<std::string, std::size_t> asm_per_board;
    std::size_t st_entries = 0;
    std::size_t spills = 0;
    std::size_t max_pressure = 0;
    int alloc_rounds = 0;
};

struct CompileResult {
    SeqProgram program;
    RegFile regs;
    std::vector<Diagnostic> warnings;
    Cfg cfg;
    SsaCfg ssa;
    Cfg lowered;  // out of SSA, before spilling
    LiveInfo liveness;
    AllocatedProgram alloc;
    StepTables tables;
    std::map<std::string, BoardProgram> boards;
    CompileStats stats;
    std::vector<StageTiming> timings;

    double total_ms() const;
    std::map<std::string, StepTable> table_map() const { return {tables.boards.begin(), tables.boards.end()}; }
};

// Throws ValidationError when the front-end diagnostics are non-empty, and
// propagates every later stage's errors unchanged.
CompileResult compile(const SeqProgram& program, const CompileOptions& options = {});
// Adds a "parse" timing in front.
CompileResult compile_file(const std::filesystem::path& path, const CompileOptions& options = {});

inline const std::vector<std::string> kEmitKinds{"tree",  "cfg", "ssa", "liveness", "igraph",
                                                 "alloc", "asm", "bin", "steptable"};
// "all" expands to everything except liveness.
std::set<std::string> parse_emit_list(const std::string& text);

struct Artifact {
    std::string file;
    std::string stage;
    std::vector<std::uint8_t> bytes;
};
std::vector<Artifact> render_artifacts(const CompileResult& r, const std::set<std::string>& emit);

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes);
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t v);
// Hash over every board's word stream, in board order.
std::uint64_t control_hash(const std::map<std::string, BoardProgram>& boards);

std::string manifest_json(const CompileResult& r, const std::string& source, const std::vector<Artifact>& artifacts);

struct ScanPoint {
    std::string value;
    StepTables tables;
    std::uint64_t control_hash = 0;
};

struct ScanResult {
    CompileResult base;  // control programs shared by every point
    std::vector<ScanPoint> points;
};

// Recompiles the program once per point with the scanned state isolated
// from dedup and checks every point's control words against the base.
// Throws ScanTargetError (missing or unresolvable scan) or ValidationError
// (control programs diverge).
ScanResult expand_scan(const SeqProgram& program, const CompileOptions& options = {});

}  // namespace bell
