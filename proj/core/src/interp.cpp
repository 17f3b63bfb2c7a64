#include "bell/interp.hpp"

#include "bell/errors.hpp"

namespace bell {

std::int32_t wrap_add(std::int32_t a, std::int32_t b) {
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(a) + static_cast<std::uint32_t>(b));
}

std::int32_t wrap_sub(std::int32_t a, std::int32_t b) {
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(a) - static_cast<std::uint32_t>(b));
}

InterpResult interpret(const Cfg& cfg, DetectionScript ds, std::size_t max_instructions) {
    InterpResult r;
    if (cfg.blocks.empty()) {
        return r;
    }
    std::map<Var, std::int32_t> env;
    std::map<int, std::int32_t> frame;
    auto get = [&](const Var& v) {
        auto it = env.find(v);
        if (it == env.end()) {
            throw UseBeforeDefError("variable '" + v + "' read before definition");
        }
        return it->second;
    };
    auto value = [&](const Operand& o) { return o.is_var() ? get(o.var()) : o.imm(); };
    auto log = [&](const Var& v, std::int32_t x) {
        if (!v.starts_with('%')) {
            r.defs.push_back({base_name(v), x});
            r.final_vars[base_name(v)] = x;
        }
    };

    std::size_t executed = 0;
    BlockId prev = 0;
    BlockId cur = 0;
    bool entered = false;
    for (;;) {
        const BasicBlock& b = cfg.blocks[cur];
        if (entered && !b.phis.empty()) {
            std::vector<std::pair<Var, std::int32_t>> updates;
            for (const auto& phi : b.phis) {
                for (const auto& [pred, v] : phi.args) {
                    if (pred == prev && !v.empty()) {
                        updates.emplace_back(phi.dst, get(v));
                    }
                }
            }
            for (const auto& [v, x] : updates) {
                env[v] = x;
            }
        }
        entered = true;
        for (const auto& i : b.instrs) {
            if (++executed > max_instructions) {
                throw MaxTicksExceeded("interpreter exceeded " + std::to_string(max_instructions) + " instructions");
            }
            switch (i.kind) {
            case Instr::Kind::PlayStep: r.plays.push_back(i.state); break;
            case Instr::Kind::Arith: {
                std::int32_t x = value(i.a);
                if (i.op == ArithOp::Add) {
                    x = wrap_add(x, value(i.b));
                } else if (i.op == ArithOp::Sub) {
                    x = wrap_sub(x, value(i.b));
                }
                env[i.dst] = x;
                log(i.dst, x);
                break;
            }
            case Instr::Kind::Copy: env[i.dst] = get(i.a.var()); break;
            case Instr::Kind::ReadCounter: {
                const std::int32_t x = ds.next();
                ++r.counter_reads;
                env[i.dst] = x;
                log(i.dst, x);
                break;
            }
            case Instr::Kind::Load: {
                auto it = frame.find(i.slot);
                if (it == frame.end()) {
                    throw UseBeforeDefError("frame slot " + std::to_string(i.slot) + " read before store");
                }
                env[i.dst] = it->second;
                break;
            }
            case Instr::Kind::Store: frame[i.slot] = get(i.a.var()); break;
            case Instr::Kind::Barrier:
            case Instr::Kind::Broadcast:
            case Instr::Kind::WaitHost: break;
            }
        }
        if (++executed > max_instructions) {
            throw MaxTicksExceeded("interpreter exceeded " + std::to_string(max_instructions) + " instructions");
        }
        const Terminator& t = b.term;
        prev = cur;
        if (t.kind == Terminator::Kind::Halt) {
            break;
        }
        if (t.kind == Terminator::Kind::Jump) {
            cur = t.target;
        } else {
            cur = evaluate(t.cond.op, value(t.cond.lhs), value(t.cond.rhs)) ? t.target : t.else_target;
        }
    }
    return r;
}

}  // namespace bell
