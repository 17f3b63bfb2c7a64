#include "bell/isa.hpp"

#include <array>
#include <sstream>

#include "bell/errors.hpp"

namespace bell {
namespace {

constexpr std::uint32_t kOpR = 0x33;
constexpr std::uint32_t kOpI = 0x13;
constexpr std::uint32_t kOpLoad = 0x03;
constexpr std::uint32_t kOpStore = 0x23;
constexpr std::uint32_t kOpLui = 0x37;
constexpr std::uint32_t kOpBranch = 0x63;
constexpr std::uint32_t kOpJal = 0x6F;

enum class Format { R, I, S, U, B, J, Custom };

struct OpInfo {
    Op op;
    std::string_view name;
    Format format;
    std::uint32_t opcode;
    std::uint32_t funct3;
    std::uint32_t funct7;
};

constexpr std::array<OpInfo, 21> kOps{{
    {Op::ADD, "add", Format::R, kOpR, 0, 0x00},
    {Op::SUB, "sub", Format::R, kOpR, 0, 0x20},
    {Op::SLT, "slt", Format::R, kOpR, 2, 0x00},
    {Op::ADDI, "addi", Format::I, kOpI, 0, 0},
    {Op::SLTI, "slti", Format::I, kOpI, 2, 0},
    {Op::LW, "lw", Format::I, kOpLoad, 2, 0},
    {Op::SW, "sw", Format::S, kOpStore, 2, 0},
    {Op::LUI, "lui", Format::U, kOpLui, 0, 0},
    {Op::BEQ, "beq", Format::B, kOpBranch, 0, 0},
    {Op::BNE, "bne", Format::B, kOpBranch, 1, 0},
    {Op::BLT, "blt", Format::B, kOpBranch, 4, 0},
    {Op::BGE, "bge", Format::B, kOpBranch, 5, 0},
    {Op::JAL, "jal", Format::J, kOpJal, 0, 0},
    {Op::STEP, "step", Format::Custom, kOpcodeCustom, 0, 0},
    {Op::STEPR, "stepr", Format::Custom, kOpcodeCustom, 1, 0},
    {Op::BARRIER, "barrier", Format::Custom, kOpcodeCustom, 2, 0},
    {Op::READCNT, "readcnt", Format::Custom, kOpcodeCustom, 3, 0},
    {Op::BCASTR, "bcastr", Format::Custom, kOpcodeCustom, 4, 0},
    {Op::RECV, "recv", Format::Custom, kOpcodeCustom, 5, 0},
    {Op::WAITHOST, "waithost", Format::Custom, kOpcodeCustom, 6, 0},
    {Op::HALT, "halt", Format::Custom, kOpcodeCustom, 7, 0},
}};

const OpInfo& info(Op op) { return kOps[static_cast<std::size_t>(op)]; }

std::uint32_t bits(std::uint32_t v, int hi, int lo) { return (v >> lo) & ((1u << (hi - lo + 1)) - 1); }

std::int32_t sign_extend(std::uint32_t v, int width) {
    const std::uint32_t m = 1u << (width - 1);
    return static_cast<std::int32_t>((v ^ m) - m);
}

void check_reg(std::uint8_t r, const char* field, Op op) {
    if (r > 31) {
        throw ImmediateOverflowError(std::string(field) + " x" + std::to_string(r) + " out of range in " +
                                     std::string(mnemonic(op)));
    }
}

void check_range(std::int64_t v, std::int64_t lo, std::int64_t hi, Op op) {
    if (v < lo || v > hi) {
        const bool offset = is_branch(op) || op == Op::JAL;
        const std::string msg = std::string(offset ? "offset " : "immediate ") + std::to_string(v) + " outside [" +
                                std::to_string(lo) + ", " + std::to_string(hi) + "] in " + std::string(mnemonic(op));
        if (offset) {
            throw OffsetOverflowError(msg);
        }
        throw ImmediateOverflowError(msg);
    }
}

// Which register fields a format carries: rd, rs1, rs2.
struct Uses {
    bool rd, rs1, rs2, imm;
};

Uses fields(Op op) {
    switch (info(op).format) {
    case Format::R: return {true, true, true, false};
    case Format::I: return {true, true, false, true};
    case Format::S: return {false, true, true, true};
    case Format::U: return {true, false, false, true};
    case Format::B: return {false, true, true, true};
    case Format::J: return {true, false, false, true};
    case Format::Custom: break;
    }
    switch (op) {
    case Op::STEP: return {false, false, false, true};
    case Op::STEPR: return {false, true, false, false};
    case Op::READCNT: return {true, false, false, true};
    case Op::BCASTR: return {false, true, false, false};
    case Op::RECV: return {true, false, false, false};
    case Op::WAITHOST: return {false, false, false, true};
    default: return {false, false, false, false};
    }
}

}  // namespace

std::string_view mnemonic(Op op) { return info(op).name; }

std::optional<Op> parse_mnemonic(std::string_view text) {
    for (const auto& i : kOps) {
        if (i.name == text) {
            return i.op;
        }
    }
    return std::nullopt;
}

bool is_branch(Op op) { return info(op).format == Format::B; }
bool is_custom(Op op) { return info(op).format == Format::Custom; }

MachineInstr canonical(const MachineInstr& m) {
    const Uses u = fields(m.op);
    MachineInstr c;
    c.op = m.op;
    c.rd = u.rd ? m.rd : 0;
    c.rs1 = u.rs1 ? m.rs1 : 0;
    c.rs2 = u.rs2 ? m.rs2 : 0;
    c.imm = u.imm ? m.imm : 0;
    return c;
}

HiLo split_constant(std::int32_t value) {
    const auto v = static_cast<std::uint32_t>(value);
    const std::int32_t lo = sign_extend(v & 0xFFF, 12);
    const std::uint32_t hi = (v - static_cast<std::uint32_t>(lo)) >> 12;
    return {static_cast<std::int32_t>(hi), lo};
}

std::uint32_t encode(const MachineInstr& in) {
    const MachineInstr m = canonical(in);
    const OpInfo& i = info(m.op);
    check_reg(m.rd, "rd", m.op);
    check_reg(m.rs1, "rs1", m.op);
    check_reg(m.rs2, "rs2", m.op);
    const std::uint32_t rd = m.rd;
    const std::uint32_t rs1 = m.rs1;
    const std::uint32_t rs2 = m.rs2;
    const std::uint32_t f3 = i.funct3 << 12;
    switch (i.format) {
    case Format::R:
        return (i.funct7 << 25) | (rs2 << 20) | (rs1 << 15) | f3 | (rd << 7) | i.opcode;
    case Format::I: {
        check_range(m.imm, kImm12Min, kImm12Max, m.op);
        const auto imm = static_cast<std::uint32_t>(m.imm) & 0xFFF;
        return (imm << 20) | (rs1 << 15) | f3 | (rd << 7) | i.opcode;
    }
    case Format::S: {
        check_range(m.imm, kImm12Min, kImm12Max, m.op);
        const auto imm = static_cast<std::uint32_t>(m.imm) & 0xFFF;
        return (bits(imm, 11, 5) << 25) | (rs2 << 20) | (rs1 << 15) | f3 | (bits(imm, 4, 0) << 7) | i.opcode;
    }
    case Format::U:
        check_range(m.imm, 0, (1 << 20) - 1, m.op);
        return (static_cast<std::uint32_t>(m.imm) << 12) | (rd << 7) | i.opcode;
    case Format::B: {
        check_range(m.imm, kBranchWordsMin, kBranchWordsMax, m.op);
        const auto off = static_cast<std::uint32_t>(m.imm * 4);
        return (bits(off, 12, 12) << 31) | (bits(off, 10, 5) << 25) | (rs2 << 20) | (rs1 << 15) | f3 |
               (bits(off, 4, 1) << 8) | (bits(off, 11, 11) << 7) | i.opcode;
    }
    case Format::J: {
        check_range(m.imm, kJumpWordsMin, kJumpWordsMax, m.op);
        const auto off = static_cast<std::uint32_t>(m.imm * 4);
        return (bits(off, 20, 20) << 31) | (bits(off, 10, 1) << 21) | (bits(off, 11, 11) << 20) |
               (bits(off, 19, 12) << 12) | (rd << 7) | i.opcode;
    }
    case Format::Custom: break;
    }
    const std::uint32_t base = f3 | kOpcodeCustom;
    switch (m.op) {
    case Op::STEP:
        check_range(m.imm, 0, kStepIndexMax, m.op);
        return (static_cast<std::uint32_t>(m.imm) << 20) | base;
    case Op::READCNT:
        check_range(m.imm, 0, 4095, m.op);
        return (static_cast<std::uint32_t>(m.imm) << 20) | (rd << 7) | base;
    case Op::STEPR:
    case Op::BCASTR: return (rs1 << 15) | base;
    case Op::RECV: return (rd << 7) | base;
    case Op::WAITHOST: {
        check_range(m.imm, 0, kTagMax, m.op);
        const auto tag = static_cast<std::uint32_t>(m.imm);
        return (bits(tag, 19, 5) << 17) | (bits(tag, 4, 0) << 7) | base;
    }
    default: return base;  // BARRIER, HALT
    }
}

MachineInstr decode(std::uint32_t w) {
    auto fail = [&](const char* why) -> MachineInstr {
        std::ostringstream os;
        os << "word 0x" << std::hex << w << ": " << why;
        throw DecodeError(os.str());
    };
    const std::uint32_t opcode = bits(w, 6, 0);
    const std::uint32_t f3 = bits(w, 14, 12);
    const std::uint32_t f7 = bits(w, 31, 25);
    MachineInstr m;
    m.rd = static_cast<std::uint8_t>(bits(w, 11, 7));
    m.rs1 = static_cast<std::uint8_t>(bits(w, 19, 15));
    m.rs2 = static_cast<std::uint8_t>(bits(w, 24, 20));

    const OpInfo* match = nullptr;
    for (const auto& i : kOps) {
        if (i.opcode == opcode && (i.format == Format::U || i.format == Format::J || i.funct3 == f3) &&
            (i.format != Format::R || i.funct7 == f7)) {
            match = &i;
            break;
        }
    }
    if (match == nullptr) {
        return fail("no matching instruction");
    }
    m.op = match->op;
    switch (match->format) {
    case Format::R: break;
    case Format::I: m.imm = sign_extend(bits(w, 31, 20), 12); break;
    case Format::S: m.imm = sign_extend((bits(w, 31, 25) << 5) | bits(w, 11, 7), 12); break;
    case Format::U: m.imm = static_cast<std::int32_t>(bits(w, 31, 12)); break;
    case Format::B: {
        const std::uint32_t off =
            (bits(w, 31, 31) << 12) | (bits(w, 7, 7) << 11) | (bits(w, 30, 25) << 5) | (bits(w, 11, 8) << 1);
        m.imm = sign_extend(off, 13) / 4;
        if (off & 2) {
            return fail("branch offset not word aligned");
        }
        break;
    }
    case Format::J: {
        const std::uint32_t off =
            (bits(w, 31, 31) << 20) | (bits(w, 19, 12) << 12) | (bits(w, 20, 20) << 11) | (bits(w, 30, 21) << 1);
        if (off & 2) {
            return fail("jump offset not word aligned");
        }
        m.imm = sign_extend(off, 21) / 4;
        break;
    }
    case Format::Custom:
        switch (m.op) {
        case Op::STEP:
        case Op::READCNT: m.imm = static_cast<std::int32_t>(bits(w, 31, 20)); break;
        case Op::WAITHOST: m.imm = static_cast<std::int32_t>((bits(w, 31, 17) << 5) | bits(w, 11, 7)); break;
        default: break;
        }
        break;
    }
    const MachineInstr c = canonical(m);
    if (encode(c) != w) {
        return fail("non-canonical encoding");
    }
    return c;
}

std::string disasm(const MachineInstr& m) {
    std::ostringstream os;
    os << mnemonic(m.op);
    auto x = [](int r) { return "x" + std::to_string(r); };
    switch (info(m.op).format) {
    case Format::R: os << " " << x(m.rd) << ", " << x(m.rs1) << ", " << x(m.rs2); break;
    case Format::I:
        if (m.op == Op::LW) {
            os << " " << x(m.rd) << ", " << m.imm << "(" << x(m.rs1) << ")";
        } else {
            os << " " << x(m.rd) << ", " << x(m.rs1) << ", " << m.imm;
        }
        break;
    case Format::S: os << " " << x(m.rs2) << ", " << m.imm << "(" << x(m.rs1) << ")"; break;
    case Format::U: os << " " << x(m.rd) << ", " << m.imm; break;
    case Format::B: os << " " << x(m.rs1) << ", " << x(m.rs2) << ", " << (m.imm >= 0 ? "+" : "") << m.imm; break;
    case Format::J: os << " " << x(m.rd) << ", " << (m.imm >= 0 ? "+" : "") << m.imm; break;
    case Format::Custom:
        switch (m.op) {
        case Op::STEP:
        case Op::WAITHOST: os << " " << m.imm; break;
        case Op::STEPR:
        case Op::BCASTR: os << " " << x(m.rs1); break;
        case Op::READCNT: os << " " << x(m.rd) << ", " << m.imm; break;
        case Op::RECV: os << " " << x(m.rd); break;
        default: break;
        }
        break;
    }
    return os.str();
}

std::vector<std::uint32_t> encode_all(const std::vector<MachineInstr>& program) {
    std::vector<std::uint32_t> out;
    out.reserve(program.size());
    for (const auto& m : program) {
        out.push_back(encode(m));
    }
    return out;
}

std::vector<MachineInstr> decode_all(const std::vector<std::uint32_t>& words) {
    std::vector<MachineInstr> out;
    out.reserve(words.size());
    for (auto w : words) {
        out.push_back(decode(w));
    }
    return out;
}

}  // namespace bell
