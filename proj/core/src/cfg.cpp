#include "bell/cfg.hpp"

#include <map>

#include "bell/errors.hpp"

namespace bell {
namespace {

class CfgBuilder {
public:
    explicit CfgBuilder(const SeqProgram& program) : program_(program) {}

    Cfg build() {
        current_ = new_block("entry", 0);
        lower(program_.body, 0);
        BasicBlock& last = block(current_);
        if (last.instrs.empty()) {
            last.term = Terminator::halt();
            if (current_ != 0) {
                last.label = "exit";
            }
        } else {
            const BlockId exit = new_block("exit", 0);
            block(current_).term = Terminator::jump(exit);
            block(exit).term = Terminator::halt();
        }
        return std::move(cfg_);
    }

private:
    BasicBlock& block(BlockId id) { return cfg_.blocks[id]; }

    BlockId new_block(std::string label, int depth) {
        BasicBlock b;
        b.id = cfg_.blocks.size();
        b.label = std::move(label);
        b.loop_depth = depth;
        cfg_.blocks.push_back(std::move(b));
        return cfg_.blocks.back().id;
    }

    void emit(Instr i) { block(current_).instrs.push_back(std::move(i)); }

    Var fresh_temp() { return "%t" + std::to_string(temps_++); }

    Operand lower_expr(const ArithExpr& e, const SourceLoc& loc) {
        switch (e.kind) {
        case ArithExpr::Kind::Const: return Operand::of_imm(e.value);
        case ArithExpr::Kind::Var: return Operand::of_var(e.var);
        case ArithExpr::Kind::Add:
        case ArithExpr::Kind::Sub: {
            Operand a = lower_expr(e.args[0], loc);
            Operand b = lower_expr(e.args[1], loc);
            Var t = fresh_temp();
            emit(Instr::arith(t, e.kind == ArithExpr::Kind::Add ? ArithOp::Add : ArithOp::Sub, a, b, loc));
            return Operand::of_var(t);
        }
        }
        throw UnsupportedNodeError("unknown expression kind at " + loc.str());
    }

    // Branches compare at least one register; a constant-only condition gets
    // its left side moved into a temporary (no folding happens).
    CondExpr lower_cond(const CondExpr& c, const SourceLoc& loc) {
        if (c.lhs.is_var() || c.rhs.is_var()) {
            return c;
        }
        CondExpr out = c;
        Var t = fresh_temp();
        emit(Instr::arith(t, ArithOp::Mov, c.lhs, Operand::of_imm(0), loc));
        out.lhs = Operand::of_var(t);
        return out;
    }

    void lower(const NodeList& body, int depth) {
        for (const auto& n : body) {
            std::visit([&](const auto& v) { lower_node(v, n.loc, depth); }, n.node);
        }
    }

    void lower_node(const Play& v, const SourceLoc& loc, int) {
        auto idx = program_.state_index(v.state);
        if (!idx) {
            throw ValidationError("unknown state '" + v.state + "' at " + loc.str());
        }
        emit(Instr::play(*idx, loc, arm_pending_));
        arm_pending_ = false;
    }

    void lower_node(const Assign& v, const SourceLoc& loc, int) {
        const ArithExpr& e = v.expr;
        if (e.kind == ArithExpr::Kind::Add || e.kind == ArithExpr::Kind::Sub) {
            Operand a = lower_expr(e.args[0], loc);
            Operand b = lower_expr(e.args[1], loc);
            emit(Instr::arith(v.target, e.kind == ArithExpr::Kind::Add ? ArithOp::Add : ArithOp::Sub, a, b, loc));
        } else {
            emit(Instr::arith(v.target, ArithOp::Mov, lower_expr(e, loc), Operand::of_imm(0), loc));
        }
    }

    void lower_node(const ReadTtl& v, const SourceLoc& loc, int depth) {
        arm_pending_ = false;
        if (!block(current_).instrs.empty()) {
            const BlockId sync = new_block("sync", depth);
            block(current_).term = Terminator::jump(sync);
            current_ = sync;
        } else {
            block(current_).label += "+sync";
        }
        emit(Instr::barrier(loc));
        emit(Instr::read_counter(v.target, v.counter, loc));
        emit(Instr::broadcast(v.target, loc));
        const BlockId cont = new_block("sync.cont", depth);
        block(current_).term = Terminator::jump(cont);
        current_ = cont;
    }

    void lower_node(const WaitResume& v, const SourceLoc& loc, int) {
        auto [it, inserted] = tags_.emplace(v.tag, static_cast<std::uint32_t>(cfg_.host_tags.size()));
        if (inserted) {
            cfg_.host_tags.push_back(v.tag);
        }
        emit(Instr::wait_host(it->second, loc));
    }

    void lower_node(const Loop& v, const SourceLoc& loc, int depth) {
        const Var counter = "%loop" + std::to_string(loops_++);
        emit(Instr::arith(counter, ArithOp::Mov, Operand::of_imm(0), Operand::of_imm(0), loc));
        const BlockId header = new_block("loop.header", depth + 1);
        block(current_).term = Terminator::jump(header);
        const BlockId body = new_block("loop.body", depth + 1);
        current_ = body;
        lower(v.body, depth + 1);
        emit(Instr::arith(counter, ArithOp::Add, Operand::of_var(counter), Operand::of_imm(1), loc));
        block(current_).term = Terminator::jump(header);
        cfg_.back_edges.emplace_back(current_, header);
        const BlockId exit = new_block("loop.exit", depth);
        CondExpr test{Operand::of_var(counter), CmpOp::LT,
                      Operand::of_imm(static_cast<std::int32_t>(v.count))};
        block(header).term = Terminator::branch(test, body, exit, loc);
        block(header).term.counted_loop = true;
        current_ = exit;
    }

    void lower_node(const While& v, const SourceLoc& loc, int depth) {
        const BlockId header = new_block("while.header", depth + 1);
        block(current_).term = Terminator::jump(header);
        current_ = header;
        CondExpr test = lower_cond(v.cond, loc);
        const BlockId body = new_block("while.body", depth + 1);
        current_ = body;
        lower(v.body, depth + 1);
        block(current_).term = Terminator::jump(header);
        cfg_.back_edges.emplace_back(current_, header);
        const BlockId exit = new_block("while.exit", depth);
        block(header).term = Terminator::branch(test, body, exit, loc);
        current_ = exit;
    }

    void lower_node(const If& v, const SourceLoc& loc, int depth) {
        const BlockId cond_block = current_;
        CondExpr test = lower_cond(v.cond, loc);

        const BlockId then_b = new_block("if.then", depth);
        current_ = then_b;
        arm_pending_ = true;
        lower(v.then_body, depth);
        arm_pending_ = false;
        const BlockId then_end = current_;

        std::optional<BlockId> else_b;
        BlockId else_end = 0;
        if (v.else_body) {
            else_b = new_block("if.else", depth);
            current_ = *else_b;
            arm_pending_ = true;
            lower(*v.else_body, depth);
            arm_pending_ = false;
            else_end = current_;
        }

        const BlockId merge = new_block("if.merge", depth);
        block(cond_block).term = Terminator::branch(test, then_b, else_b.value_or(merge), loc);
        block(then_end).term = Terminator::jump(merge);
        if (else_b) {
            block(else_end).term = Terminator::jump(merge);
        }
        current_ = merge;
    }

    const SeqProgram& program_;
    Cfg cfg_;
    BlockId current_ = 0;
    int temps_ = 0;
    int loops_ = 0;
    bool arm_pending_ = false;
    std::map<std::string, std::uint32_t> tags_;
};

}  // namespace

Cfg build_cfg(const SeqProgram& program, std::vector<Diagnostic>* warnings) {
    Cfg cfg = CfgBuilder(program).build();
    if (warnings != nullptr) {
        for (BlockId dead : detect_dead_code(cfg)) {
            warnings->push_back({"dead-code", "block b" + std::to_string(dead) + " is unreachable", {}});
        }
    }
    return cfg;
}

std::vector<BlockId> detect_dead_code(const Cfg& cfg) {
    if (cfg.blocks.empty()) {
        return {};
    }
    std::vector<bool> seen(cfg.blocks.size(), false);
    std::vector<BlockId> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        BlockId b = stack.back();
        stack.pop_back();
        for (BlockId s : cfg.blocks[b].term.successors()) {
            if (!seen[s]) {
                seen[s] = true;
                stack.push_back(s);
            }
        }
    }
    std::vector<BlockId> dead;
    for (BlockId i = 0; i < seen.size(); ++i) {
        if (!seen[i]) {
            dead.push_back(i);
        }
    }
    return dead;
}

}  // namespace bell
