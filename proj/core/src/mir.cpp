#include "bell/mir.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace bell {

std::string base_name(const Var& v) { return v.substr(0, v.find('.')); }

std::optional<Var> Instr::def() const {
    switch (kind) {
    case Kind::Arith:
    case Kind::Copy:
    case Kind::ReadCounter:
    case Kind::Load:
        return dst;
    default:
        return std::nullopt;
    }
}

std::vector<Var> Instr::uses() const {
    std::vector<Var> out;
    switch (kind) {
    case Kind::Arith:
        if (a.is_var()) {
            out.push_back(a.var());
        }
        if (op != ArithOp::Mov && b.is_var()) {
            out.push_back(b.var());
        }
        break;
    case Kind::Copy:
    case Kind::Broadcast:
    case Kind::Store:
        out.push_back(a.var());
        break;
    default:
        break;
    }
    return out;
}

void Instr::rename_uses(const std::function<Var(const Var&)>& f) {
    switch (kind) {
    case Kind::Arith:
        if (a.is_var()) {
            a = Operand::of_var(f(a.var()));
        }
        if (op != ArithOp::Mov && b.is_var()) {
            b = Operand::of_var(f(b.var()));
        }
        break;
    case Kind::Copy:
    case Kind::Broadcast:
    case Kind::Store:
        a = Operand::of_var(f(a.var()));
        break;
    default:
        break;
    }
}

std::string Instr::str(const SeqProgram* program) const {
    std::ostringstream os;
    switch (kind) {
    case Kind::PlayStep:
        os << "play " << state;
        if (program != nullptr && state < program->states.size()) {
            os << " (" << program->states[state].name << ")";
        }
        if (arm_entry) {
            os << " [arm]";
        }
        break;
    case Kind::Arith:
        os << dst << " = ";
        switch (op) {
        case ArithOp::Mov: os << a.str(); break;
        case ArithOp::Add: os << a.str() << " + " << b.str(); break;
        case ArithOp::Sub: os << a.str() << " - " << b.str(); break;
        }
        break;
    case Kind::Copy: os << dst << " <- " << a.var(); break;
    case Kind::Barrier: os << "barrier"; break;
    case Kind::ReadCounter: os << dst << " = readcnt " << counter.board << "/" << counter.channel; break;
    case Kind::Broadcast: os << "broadcast " << a.var(); break;
    case Kind::WaitHost: os << "waithost " << tag; break;
    case Kind::Load: os << dst << " = load [" << slot << "]"; break;
    case Kind::Store: os << "store [" << slot << "] = " << a.var(); break;
    }
    return os.str();
}

Instr Instr::play(std::size_t state, SourceLoc loc, bool arm_entry) {
    Instr i;
    i.kind = Kind::PlayStep;
    i.state = state;
    i.loc = std::move(loc);
    i.arm_entry = arm_entry;
    return i;
}

Instr Instr::arith(Var dst, ArithOp op, Operand a, Operand b, SourceLoc loc) {
    Instr i;
    i.kind = Kind::Arith;
    i.dst = std::move(dst);
    i.op = op;
    i.a = std::move(a);
    i.b = op == ArithOp::Mov ? Operand::of_imm(0) : std::move(b);
    i.loc = std::move(loc);
    return i;
}

Instr Instr::copy(Var dst, Var src, SourceLoc loc) {
    Instr i;
    i.kind = Kind::Copy;
    i.dst = std::move(dst);
    i.a = Operand::of_var(std::move(src));
    i.loc = std::move(loc);
    return i;
}

Instr Instr::barrier(SourceLoc loc) {
    Instr i;
    i.kind = Kind::Barrier;
    i.loc = std::move(loc);
    return i;
}

Instr Instr::read_counter(Var dst, ChannelRef counter, SourceLoc loc) {
    Instr i;
    i.kind = Kind::ReadCounter;
    i.dst = std::move(dst);
    i.counter = std::move(counter);
    i.loc = std::move(loc);
    return i;
}

Instr Instr::broadcast(Var src, SourceLoc loc) {
    Instr i;
    i.kind = Kind::Broadcast;
    i.a = Operand::of_var(std::move(src));
    i.loc = std::move(loc);
    return i;
}

Instr Instr::wait_host(std::uint32_t tag, SourceLoc loc) {
    Instr i;
    i.kind = Kind::WaitHost;
    i.tag = tag;
    i.loc = std::move(loc);
    return i;
}

Instr Instr::load(Var dst, int slot, SourceLoc loc) {
    Instr i;
    i.kind = Kind::Load;
    i.dst = std::move(dst);
    i.slot = slot;
    i.loc = std::move(loc);
    return i;
}

Instr Instr::store(Var src, int slot, SourceLoc loc) {
    Instr i;
    i.kind = Kind::Store;
    i.a = Operand::of_var(std::move(src));
    i.slot = slot;
    i.loc = std::move(loc);
    return i;
}

std::vector<BlockId> Terminator::successors() const {
    switch (kind) {
    case Kind::Jump: return {target};
    case Kind::Branch: return {target, else_target};
    case Kind::Halt: return {};
    }
    return {};
}

std::vector<Var> Terminator::uses() const {
    std::vector<Var> out;
    if (kind == Kind::Branch) {
        if (cond.lhs.is_var()) {
            out.push_back(cond.lhs.var());
        }
        if (cond.rhs.is_var()) {
            out.push_back(cond.rhs.var());
        }
    }
    return out;
}

std::string Terminator::str() const {
    switch (kind) {
    case Kind::Jump: return "jump b" + std::to_string(target);
    case Kind::Branch:
        return "branch " + cond.str() + " ? b" + std::to_string(target) + " : b" + std::to_string(else_target);
    case Kind::Halt: return "halt";
    }
    return "?";
}

Terminator Terminator::jump(BlockId to) {
    Terminator t;
    t.kind = Kind::Jump;
    t.target = to;
    return t;
}

Terminator Terminator::branch(CondExpr cond, BlockId then_b, BlockId else_b, SourceLoc loc) {
    Terminator t;
    t.kind = Kind::Branch;
    t.cond = std::move(cond);
    t.target = then_b;
    t.else_target = else_b;
    t.loc = std::move(loc);
    return t;
}

Terminator Terminator::halt() { return Terminator{}; }

std::vector<std::vector<BlockId>> Cfg::predecessors() const {
    std::vector<std::vector<BlockId>> preds(blocks.size());
    for (const auto& b : blocks) {
        for (BlockId s : b.term.successors()) {
            // A branch with both arms to one block contributes one edge.
            if (preds[s].empty() || preds[s].back() != b.id) {
                preds[s].push_back(b.id);
            }
        }
    }
    return preds;
}

std::size_t Cfg::instr_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks) {
        n += b.instrs.size();
    }
    return n;
}

std::vector<Var> Cfg::variables() const {
    std::set<Var> vars;
    for (const auto& b : blocks) {
        for (const auto& phi : b.phis) {
            vars.insert(phi.dst);
            for (const auto& [_, v] : phi.args) {
                if (!v.empty()) {
                    vars.insert(v);
                }
            }
        }
        for (const auto& i : b.instrs) {
            if (auto d = i.def()) {
                vars.insert(*d);
            }
            for (auto& u : i.uses()) {
                vars.insert(u);
            }
        }
        for (auto& u : b.term.uses()) {
            vars.insert(u);
        }
    }
    return {vars.begin(), vars.end()};
}

std::string dump_cfg(const Cfg& cfg, const SeqProgram* program) {
    std::ostringstream os;
    os << "cfg blocks=" << cfg.blocks.size() << " back_edges=" << cfg.back_edges.size() << "\n";
    for (const auto& b : cfg.blocks) {
        os << "b" << b.id << " [" << b.label << "] depth=" << b.loop_depth << "\n";
        for (const auto& phi : b.phis) {
            os << "  " << phi.dst << " = phi(";
            for (std::size_t k = 0; k < phi.args.size(); ++k) {
                os << (k ? ", " : "") << "b" << phi.args[k].first << ": "
                   << (phi.args[k].second.empty() ? "undef" : phi.args[k].second);
            }
            os << ")\n";
        }
        for (const auto& i : b.instrs) {
            os << "  " << i.str(program);
            if (!i.loc.file.empty()) {
                os << "    ; " << i.loc.str();
            }
            os << "\n";
        }
        os << "  " << b.term.str() << "\n";
    }
    return os.str();
}

std::string dump_cfg_dot(const Cfg& cfg) {
    std::ostringstream os;
    os << "digraph cfg {\n  node [shape=box, fontname=monospace];\n";
    for (const auto& b : cfg.blocks) {
        os << "  b" << b.id << " [label=\"b" << b.id << " " << b.label << "\\n" << b.instrs.size()
           << " instrs, depth " << b.loop_depth << "\"];\n";
    }
    for (const auto& b : cfg.blocks) {
        const auto succ = b.term.successors();
        for (std::size_t k = 0; k < succ.size(); ++k) {
            const bool back = std::find(cfg.back_edges.begin(), cfg.back_edges.end(),
                                        std::make_pair(b.id, succ[k])) != cfg.back_edges.end();
            os << "  b" << b.id << " -> b" << succ[k];
            if (b.term.kind == Terminator::Kind::Branch) {
                os << " [label=\"" << (k == 0 ? "T" : "F") << "\"" << (back ? ", style=dashed" : "") << "]";
            } else if (back) {
                os << " [style=dashed]";
            }
            os << ";\n";
        }
    }
    os << "}\n";
    return os.str();
}

}  // namespace bell
