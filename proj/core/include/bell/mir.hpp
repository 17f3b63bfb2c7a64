#pragma once

// Mid-level IR: basic blocks of straight-line ops plus one terminator each.
// The same container carries the CFG through every middle-end stage; phis
// are only populated in SSA form, Load/Store only after spill insertion.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bell/program.hpp"

namespace bell {

using BlockId = std::size_t;
using Var = std::string;

// User variables are identifiers; compiler counters start with '%'; SSA
// versions append ".N"; spill temporaries append ".sN".
std::string base_name(const Var& v);

enum class ArithOp { Mov, Add, Sub };

struct Instr {
    enum class Kind {
        PlayStep,     // state: program state index
        Arith,        // dst = a (op) b
        Copy,         // dst = a.var(); compiler-introduced
        Barrier,
        ReadCounter,  // dst = photon count of `counter`
        Broadcast,    // a.var() is the broadcast word
        WaitHost,     // tag
        Load,         // dst = frame[slot]
        Store,        // frame[slot] = a.var()
    };

    Kind kind = Kind::PlayStep;
    SourceLoc loc;
    std::size_t state = 0;
    bool arm_entry = false;  // first step of an if/else arm
    Var dst;
    ArithOp op = ArithOp::Mov;
    Operand a = Operand::of_imm(0);
    Operand b = Operand::of_imm(0);
    ChannelRef counter;
    std::uint32_t tag = 0;
    int slot = 0;

    bool operator==(const Instr&) const = default;

    std::optional<Var> def() const;
    std::vector<Var> uses() const;
    void rename_uses(const std::function<Var(const Var&)>& f);
    std::string str(const SeqProgram* program = nullptr) const;

    static Instr play(std::size_t state, SourceLoc loc, bool arm_entry = false);
    static Instr arith(Var dst, ArithOp op, Operand a, Operand b, SourceLoc loc);
    static Instr copy(Var dst, Var src, SourceLoc loc = {});
    static Instr barrier(SourceLoc loc);
    static Instr read_counter(Var dst, ChannelRef counter, SourceLoc loc);
    static Instr broadcast(Var src, SourceLoc loc);
    static Instr wait_host(std::uint32_t tag, SourceLoc loc);
    static Instr load(Var dst, int slot, SourceLoc loc = {});
    static Instr store(Var src, int slot, SourceLoc loc = {});
};

struct Terminator {
    enum class Kind { Jump, Branch, Halt };
    Kind kind = Kind::Halt;
    CondExpr cond;                 // Branch only
    BlockId target = 0;            // Jump target / Branch taken target
    BlockId else_target = 0;       // Branch fall-through target
    SourceLoc loc;
    bool counted_loop = false;     // compares a Loop counter against its bound

    bool operator==(const Terminator&) const = default;

    std::vector<BlockId> successors() const;
    std::vector<Var> uses() const;
    std::string str() const;

    static Terminator jump(BlockId to);
    static Terminator branch(CondExpr cond, BlockId then_b, BlockId else_b, SourceLoc loc);
    static Terminator halt();
};

struct Phi {
    Var dst;
    // (predecessor, incoming version); empty Var means no definition reaches
    // along that edge.
    std::vector<std::pair<BlockId, Var>> args;

    bool operator==(const Phi&) const = default;
};

struct BasicBlock {
    BlockId id = 0;
    std::string label;  // role tag for dumps: entry, loop.header, if.merge, ...
    std::vector<Phi> phis;
    std::vector<Instr> instrs;
    Terminator term;
    int loop_depth = 0;

    bool operator==(const BasicBlock&) const = default;
};

struct Cfg {
    std::vector<BasicBlock> blocks;  // blocks[i].id == i, entry is 0
    // Block pairs (latch, header) for each back edge, in creation order.
    std::vector<std::pair<BlockId, BlockId>> back_edges;
    // Distinct WAITHOST tags, indexed by Instr::tag.
    std::vector<std::string> host_tags;

    bool operator==(const Cfg&) const = default;

    std::vector<std::vector<BlockId>> predecessors() const;
    std::size_t instr_count() const;
    std::vector<Var> variables() const;  // sorted, every defined or used var
};

// Deterministic textual dump; `program` supplies state names when given.
std::string dump_cfg(const Cfg& cfg, const SeqProgram* program = nullptr);
// Graphviz description for external rendering.
std::string dump_cfg_dot(const Cfg& cfg);

}  // namespace bell
