#pragma once

// Board ISA: fixed 32-bit words, RISC-V field layout for the standard subset
// plus one custom major opcode for coordination. Field-level reference:
// docs/isa.md.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bell {

enum class Op {
    ADD, SUB, SLT,           // R-type
    ADDI, SLTI, LW,          // I-type
    SW,                      // S-type
    LUI,                     // U-type
    BEQ, BNE, BLT, BGE,      // B-type, imm = word offset
    JAL,                     // J-type, imm = word offset
    STEP, STEPR, BARRIER, READCNT, BCASTR, RECV, WAITHOST, HALT,  // custom
};

inline constexpr std::uint32_t kOpcodeCustom = 0x0B;
inline constexpr std::uint32_t kHaltWord = 0x0000700B;

std::string_view mnemonic(Op op);
std::optional<Op> parse_mnemonic(std::string_view text);
bool is_branch(Op op);
bool is_custom(Op op);

// Unused fields are zero in canonical form; encode ignores them.
struct MachineInstr {
    Op op = Op::HALT;
    std::uint8_t rd = 0;
    std::uint8_t rs1 = 0;
    std::uint8_t rs2 = 0;
    std::int32_t imm = 0;

    bool operator==(const MachineInstr&) const = default;
};

// Copy with every field the format does not carry cleared.
MachineInstr canonical(const MachineInstr& m);

// Throws ImmediateOverflowError (constant or register out of range) or
// OffsetOverflowError (branch/jump distance out of range).
std::uint32_t encode(const MachineInstr& m);
// Throws DecodeError for words outside the encoding table.
MachineInstr decode(std::uint32_t word);

// "addi x1, x0, 5"; branch/jump offsets print as signed word counts.
std::string disasm(const MachineInstr& m);

// Immediate ranges.
inline constexpr std::int32_t kImm12Min = -2048;
inline constexpr std::int32_t kImm12Max = 2047;
inline constexpr std::int32_t kBranchWordsMin = -1024;
inline constexpr std::int32_t kBranchWordsMax = 1023;
inline constexpr std::int32_t kJumpWordsMin = -(1 << 18);
inline constexpr std::int32_t kJumpWordsMax = (1 << 18) - 1;
inline constexpr std::int32_t kStepIndexMax = 4095;
inline constexpr std::int32_t kTagMax = (1 << 20) - 1;

// Split of a 32-bit constant into LUI/ADDI parts: value == (hi << 12) + lo
// (mod 2^32), hi in [0, 2^20), lo in [-2048, 2047].
struct HiLo {
    std::int32_t hi;
    std::int32_t lo;
};
HiLo split_constant(std::int32_t value);
inline bool fits_imm12(std::int64_t v) { return v >= kImm12Min && v <= kImm12Max; }

std::vector<std::uint32_t> encode_all(const std::vector<MachineInstr>& program);
std::vector<MachineInstr> decode_all(const std::vector<std::uint32_t>& words);

}  // namespace bell
