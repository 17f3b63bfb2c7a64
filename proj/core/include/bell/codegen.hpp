#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bell/isa.hpp"
#include "bell/mir.hpp"
#include "bell/regalloc.hpp"
#include "bell/steptable.hpp"

namespace bell {

struct AsmLine {
    std::vector<std::string> labels;  // block labels resolving to this line
    MachineInstr instr;
    std::optional<BlockId> target;  // branch/jump destination before resolution
    SourceLoc loc;
    bool feedback_step = false;  // STEP opening an if/else arm
    std::string def_var;         // user variable whose value this line writes
    std::string note;

    bool operator==(const AsmLine&) const = default;
};

struct BoardProgram {
    std::string board_id;
    BoardKind role = BoardKind::DDS;
    bool broadcaster = false;  // owns the photon counters, issues BCASTR
    std::vector<AsmLine> lines;
    std::vector<std::uint32_t> words;
    std::vector<std::string> host_tags;  // WAITHOST immediate -> tag name

    bool operator==(const BoardProgram&) const = default;
    std::size_t size() const { return lines.size(); }
};

// One program per board, blocks laid out in id order. Branch/jump offsets
// are resolved and words encoded before returning. Throws
// UnsupportedNodeError, OffsetOverflowError or ImmediateOverflowError.
std::map<std::string, BoardProgram> lower_to_asm(const Cfg& cfg, const Allocation& a, const SeqProgram& p,
                                                 const StepTables& st, const RegFile& rf = {});

// Resolves targets into word offsets and re-encodes `words`.
void assemble(BoardProgram& bp);

// Role-neutral view used for congruence: READCNT/BCASTR/RECV erased, step
// indices dropped, control transfers shown by target label.
std::vector<std::string> skeleton(const BoardProgram& bp);

std::string format_asm(const BoardProgram& bp);
std::vector<std::uint8_t> words_to_bytes(const std::vector<std::uint32_t>& words);
std::vector<std::uint32_t> bytes_to_words(const std::vector<std::uint8_t>& bytes);

}  // namespace bell
