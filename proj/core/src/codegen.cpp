#include "bell/codegen.hpp"

#include <iomanip>
#include <sstream>

#include "bell/errors.hpp"

namespace bell {
namespace {

class Lowering {
public:
    Lowering(const Cfg& cfg, const Allocation& a, const SeqProgram& p, const StepTables& st, const RegFile& rf,
             const BoardDecl& board, bool broadcaster)
        : cfg_(cfg), a_(a), p_(p), st_(st), rf_(rf) {
        out_.board_id = board.id;
        out_.role = board.kind;
        out_.broadcaster = broadcaster;
        out_.host_tags = cfg.host_tags;
    }

    BoardProgram run() {
        for (const auto& b : cfg_.blocks) {
            pending_labels_.push_back("b" + std::to_string(b.id));
            block_start_[b.id] = out_.lines.size();
            for (const auto& i : b.instrs) {
                lower(i);
            }
            lower(b.term, b.id);
        }
        if (!pending_labels_.empty()) {
            throw UnsupportedNodeError("last block has no terminator instruction");
        }
        for (auto& l : out_.lines) {
            if (l.target) {
                l.instr.imm = static_cast<std::int32_t>(block_start_.at(*l.target)) -
                              static_cast<std::int32_t>(&l - out_.lines.data());
            }
        }
        return std::move(out_);
    }

private:
    std::uint8_t reg(const Var& v) const {
        auto it = a_.reg.find(v);
        if (it == a_.reg.end()) {
            throw AllocationError("variable '" + v + "' has no register");
        }
        return static_cast<std::uint8_t>(it->second);
    }

    std::uint8_t scratch() const { return static_cast<std::uint8_t>(rf_.scratch()); }

    AsmLine& emit(MachineInstr m, const SourceLoc& loc, std::string note = {}) {
        AsmLine line;
        line.labels = std::move(pending_labels_);
        pending_labels_.clear();
        line.instr = canonical(m);
        line.loc = loc;
        line.note = std::move(note);
        out_.lines.push_back(std::move(line));
        return out_.lines.back();
    }

    static std::string user_var(const Var& v) { return v.starts_with('%') ? std::string{} : base_name(v); }

    // rd = value; LUI+ADDI when it does not fit (or `fixed`, which keeps the
    // length independent of the value).
    AsmLine& materialize(std::uint8_t rd, std::int32_t value, const SourceLoc& loc, bool fixed = false) {
        if (!fixed && fits_imm12(value)) {
            return emit({Op::ADDI, rd, 0, 0, value}, loc);
        }
        const HiLo hl = split_constant(value);
        emit({Op::LUI, rd, 0, 0, hl.hi}, loc);
        return emit({Op::ADDI, rd, rd, 0, hl.lo}, loc);
    }

    // rd = rs + value (mod 2^32).
    AsmLine& add_imm(std::uint8_t rd, std::uint8_t rs, std::int32_t value, const SourceLoc& loc) {
        if (fits_imm12(value)) {
            return emit({Op::ADDI, rd, rs, 0, value}, loc);
        }
        materialize(scratch(), value, loc);
        return emit({Op::ADD, rd, rs, scratch(), 0}, loc);
    }

    static std::int32_t wrap_neg(std::int32_t v) {
        return static_cast<std::int32_t>(0u - static_cast<std::uint32_t>(v));
    }

    AsmLine& lower_arith(const Instr& i) {
        const std::uint8_t rd = reg(i.dst);
        const Operand& a = i.a;
        const Operand& b = i.b;
        if (i.op == ArithOp::Mov) {
            return a.is_var() ? emit({Op::ADDI, rd, reg(a.var()), 0, 0}, i.loc) : materialize(rd, a.imm(), i.loc);
        }
        const bool add = i.op == ArithOp::Add;
        if (a.is_var() && b.is_var()) {
            return emit({add ? Op::ADD : Op::SUB, rd, reg(a.var()), reg(b.var()), 0}, i.loc);
        }
        if (a.is_var()) {
            return add_imm(rd, reg(a.var()), add ? b.imm() : wrap_neg(b.imm()), i.loc);
        }
        if (b.is_var()) {
            if (add) {
                return add_imm(rd, reg(b.var()), a.imm(), i.loc);
            }
            emit({Op::SUB, rd, 0, reg(b.var()), 0}, i.loc);
            return add_imm(rd, rd, a.imm(), i.loc);
        }
        materialize(rd, a.imm(), i.loc);
        return add_imm(rd, rd, add ? b.imm() : wrap_neg(b.imm()), i.loc);
    }

    void lower(const Instr& i) {
        switch (i.kind) {
        case Instr::Kind::PlayStep: {
            const auto& entry = st_.state_entry.at(i.state);
            if (!entry) {
                throw StepIndexError("state " + std::to_string(i.state) + " has no step table entry");
            }
            const auto idx = static_cast<std::int32_t>(*entry);
            AsmLine* line;
            if (idx <= kStepIndexMax) {
                line = &emit({Op::STEP, 0, 0, 0, idx}, i.loc);
            } else {
                materialize(scratch(), idx, i.loc);
                line = &emit({Op::STEPR, 0, scratch(), 0, 0}, i.loc);
            }
            line->feedback_step = i.arm_entry;
            line->note = p_.states.at(i.state).name;
            break;
        }
        case Instr::Kind::Arith: lower_arith(i).def_var = user_var(i.dst); break;
        case Instr::Kind::Copy:
            if (reg(i.dst) != reg(i.a.var())) {
                emit({Op::ADDI, reg(i.dst), reg(i.a.var()), 0, 0}, i.loc, "copy");
            }
            break;
        case Instr::Kind::Barrier: emit({Op::BARRIER}, i.loc); break;
        case Instr::Kind::ReadCounter:
            if (out_.broadcaster) {
                emit({Op::READCNT, reg(i.dst), 0, 0, i.counter.channel}, i.loc).def_var = user_var(i.dst);
            }
            break;
        case Instr::Kind::Broadcast:
            if (out_.broadcaster) {
                emit({Op::BCASTR, 0, reg(i.a.var()), 0, 0}, i.loc);
            } else {
                emit({Op::RECV, reg(i.a.var()), 0, 0, 0}, i.loc).def_var = user_var(i.a.var());
            }
            break;
        case Instr::Kind::WaitHost:
            emit({Op::WAITHOST, 0, 0, 0, static_cast<std::int32_t>(i.tag)}, i.loc, cfg_.host_tags.at(i.tag));
            break;
        case Instr::Kind::Load: emit({Op::LW, reg(i.dst), 0, 0, i.slot * 4}, i.loc, "reload"); break;
        case Instr::Kind::Store: emit({Op::SW, 0, 0, reg(i.a.var()), i.slot * 4}, i.loc, "spill"); break;
        }
    }

    std::uint8_t operand_reg(const Operand& o, bool fixed, const SourceLoc& loc) {
        if (o.is_var()) {
            return reg(o.var());
        }
        if (o.imm() == 0 && !fixed) {
            return 0;
        }
        materialize(scratch(), o.imm(), loc, fixed).note = fixed ? "loop bound" : "";
        return scratch();
    }

    void branch(CmpOp op, std::uint8_t l, std::uint8_t r, BlockId to, const SourceLoc& loc) {
        MachineInstr m;
        switch (op) {
        case CmpOp::LT: m = {Op::BLT, 0, l, r, 0}; break;
        case CmpOp::GE: m = {Op::BGE, 0, l, r, 0}; break;
        case CmpOp::GT: m = {Op::BLT, 0, r, l, 0}; break;
        case CmpOp::LE: m = {Op::BGE, 0, r, l, 0}; break;
        case CmpOp::EQ: m = {Op::BEQ, 0, l, r, 0}; break;
        case CmpOp::NE: m = {Op::BNE, 0, l, r, 0}; break;
        }
        emit(m, loc).target = to;
    }

    void lower(const Terminator& t, BlockId self) {
        const BlockId next = self + 1;
        switch (t.kind) {
        case Terminator::Kind::Halt: emit({Op::HALT}, t.loc); break;
        case Terminator::Kind::Jump:
            if (t.target != next) {
                emit({Op::JAL, 0, 0, 0, 0}, t.loc).target = t.target;
            }
            break;
        case Terminator::Kind::Branch: {
            const std::uint8_t l = operand_reg(t.cond.lhs, t.counted_loop && !t.cond.lhs.is_var(), t.loc);
            const std::uint8_t r = operand_reg(t.cond.rhs, t.counted_loop && !t.cond.rhs.is_var(), t.loc);
            if (t.target == next) {
                branch(negate(t.cond.op), l, r, t.else_target, t.loc);
            } else {
                branch(t.cond.op, l, r, t.target, t.loc);
                if (t.else_target != next) {
                    emit({Op::JAL, 0, 0, 0, 0}, t.loc).target = t.else_target;
                }
            }
            break;
        }
        }
    }

    const Cfg& cfg_;
    const Allocation& a_;
    const SeqProgram& p_;
    const StepTables& st_;
    const RegFile& rf_;
    BoardProgram out_;
    std::vector<std::string> pending_labels_;
    std::map<BlockId, std::size_t> block_start_;
};

}  // namespace

std::map<std::string, BoardProgram> lower_to_asm(const Cfg& cfg, const Allocation& a, const SeqProgram& p,
                                                 const StepTables& st, const RegFile& rf) {
    rf.validate();
    const BoardDecl* counter = p.config.counter_board();
    std::map<std::string, BoardProgram> out;
    for (const auto& b : p.config.boards) {
        const bool broadcaster = counter != nullptr && counter->id == b.id;
        BoardProgram bp = Lowering(cfg, a, p, st, rf, b, broadcaster).run();
        assemble(bp);
        out.emplace(b.id, std::move(bp));
    }
    return out;
}

void assemble(BoardProgram& bp) {
    bp.words.clear();
    bp.words.reserve(bp.lines.size());
    for (const auto& l : bp.lines) {
        bp.words.push_back(encode(l.instr));
    }
}

std::vector<std::string> skeleton(const BoardProgram& bp) {
    std::map<std::size_t, std::string> label_at;
    for (std::size_t k = 0; k < bp.lines.size(); ++k) {
        if (!bp.lines[k].labels.empty()) {
            label_at[k] = bp.lines[k].labels.front();
        }
    }
    std::vector<std::string> out;
    for (std::size_t k = 0; k < bp.lines.size(); ++k) {
        const AsmLine& l = bp.lines[k];
        const Op op = l.instr.op;
        if (op == Op::READCNT || op == Op::BCASTR || op == Op::RECV) {
            continue;
        }
        std::string s;
        for (const auto& lab : l.labels) {
            s += lab + ": ";
        }
        if (op == Op::STEP) {
            s += "step";
        } else if (l.target) {
            MachineInstr m = l.instr;
            m.imm = 0;
            s += disasm(m) + " -> b" + std::to_string(*l.target);
        } else {
            s += disasm(l.instr);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string format_asm(const BoardProgram& bp) {
    std::ostringstream os;
    os << "; board " << bp.board_id << " (" << to_string(bp.role) << (bp.broadcaster ? ", broadcaster" : "")
       << ") " << bp.lines.size() << " instructions\n";
    for (std::size_t k = 0; k < bp.lines.size(); ++k) {
        const AsmLine& l = bp.lines[k];
        for (const auto& lab : l.labels) {
            os << lab << ":\n";
        }
        std::string text = disasm(l.instr);
        if (l.target) {
            MachineInstr m = l.instr;
            text = std::string(mnemonic(m.op));
            if (m.op == Op::JAL) {
                text += " x" + std::to_string(m.rd) + ", b" + std::to_string(*l.target);
            } else {
                text += " x" + std::to_string(m.rs1) + ", x" + std::to_string(m.rs2) + ", b" + std::to_string(*l.target);
            }
        }
        std::ostringstream addr;
        addr << std::setw(4) << std::setfill('0') << k;
        os << "  " << addr.str() << "  ";
        std::ostringstream word;
        word << std::hex << std::setw(8) << std::setfill('0') << bp.words.at(k);
        os << word.str() << "  " << std::left << std::setw(24) << text << std::right;
        std::string comment;
        if (!l.loc.file.empty()) {
            comment += l.loc.str();
        }
        if (!l.note.empty()) {
            comment += (comment.empty() ? "" : " ") + l.note;
        }
        if (l.feedback_step) {
            comment += " [arm]";
        }
        if (!comment.empty()) {
            os << " ; " << comment;
        }
        os << "\n";
    }
    return os.str();
}

std::vector<std::uint8_t> words_to_bytes(const std::vector<std::uint32_t>& words) {
    std::vector<std::uint8_t> out;
    out.reserve(words.size() * 4);
    for (auto w : words) {
        for (int k = 0; k < 4; ++k) {
            out.push_back(static_cast<std::uint8_t>(w >> (8 * k)));
        }
    }
    return out;
}

std::vector<std::uint32_t> bytes_to_words(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() % 4 != 0) {
        throw DecodeError("word stream length " + std::to_string(bytes.size()) + " is not a multiple of 4");
    }
    std::vector<std::uint32_t> out(bytes.size() / 4);
    for (std::size_t k = 0; k < out.size(); ++k) {
        for (int b = 0; b < 4; ++b) {
            out[k] |= static_cast<std::uint32_t>(bytes[4 * k + b]) << (8 * b);
        }
    }
    return out;
}

}  // namespace bell
