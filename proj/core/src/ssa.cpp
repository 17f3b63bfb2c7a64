#include "bell/ssa.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "bell/cfg.hpp"
#include "bell/errors.hpp"

namespace bell {

bool DomInfo::dominates(BlockId a, BlockId b) const {
    for (;;) {
        if (a == b) {
            return true;
        }
        if (idom[b] == b) {
            return false;
        }
        b = idom[b];
    }
}

DomInfo compute_dominators(const Cfg& cfg) {
    const auto dead = detect_dead_code(cfg);
    if (!dead.empty()) {
        throw UnreachableBlockError("block b" + std::to_string(dead.front()) + " is unreachable from the entry");
    }
    const std::size_t n = cfg.blocks.size();
    DomInfo info;
    info.frontier.resize(n);
    info.children.resize(n);
    if (n == 0) {
        return info;
    }

    // Post-order by iterative DFS, successors in terminator order.
    std::vector<BlockId> post;
    std::vector<int> state(n, 0);
    std::vector<std::pair<BlockId, std::size_t>> stack{{0, 0}};
    state[0] = 1;
    while (!stack.empty()) {
        auto& [b, k] = stack.back();
        const auto succ = cfg.blocks[b].term.successors();
        if (k < succ.size()) {
            BlockId s = succ[k++];
            if (state[s] == 0) {
                state[s] = 1;
                stack.emplace_back(s, 0);
            }
        } else {
            post.push_back(b);
            stack.pop_back();
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < post.size(); ++i) {
        order[post[i]] = i;
    }
    info.rpo.assign(post.rbegin(), post.rend());

    // Cooper, Harvey & Kennedy: iterate idom over RPO until stable.
    const auto preds = cfg.predecessors();
    constexpr BlockId kUndef = static_cast<BlockId>(-1);
    std::vector<BlockId> idom(n, kUndef);
    idom[0] = 0;
    auto intersect = [&](BlockId a, BlockId b) {
        while (a != b) {
            while (order[a] < order[b]) {
                a = idom[a];
            }
            while (order[b] < order[a]) {
                b = idom[b];
            }
        }
        return a;
    };
    for (bool changed = true; changed;) {
        changed = false;
        for (BlockId b : info.rpo) {
            if (b == 0) {
                continue;
            }
            BlockId next = kUndef;
            for (BlockId p : preds[b]) {
                if (idom[p] == kUndef) {
                    continue;
                }
                next = next == kUndef ? p : intersect(p, next);
            }
            if (idom[b] != next) {
                idom[b] = next;
                changed = true;
            }
        }
    }
    info.idom = idom;
    for (BlockId b = 1; b < n; ++b) {
        info.children[idom[b]].push_back(b);
    }

    for (BlockId b = 0; b < n; ++b) {
        if (preds[b].size() < 2) {
            continue;
        }
        for (BlockId p : preds[b]) {
            BlockId runner = p;
            while (runner != idom[b]) {
                info.frontier[runner].insert(b);
                if (runner == idom[runner]) {
                    break;
                }
                runner = idom[runner];
            }
        }
    }
    return info;
}

std::set<BlockId> iterated_frontier(const DomInfo& dom, const std::set<BlockId>& blocks) {
    std::set<BlockId> result;
    std::vector<BlockId> work(blocks.begin(), blocks.end());
    std::set<BlockId> queued(blocks.begin(), blocks.end());
    while (!work.empty()) {
        BlockId b = work.back();
        work.pop_back();
        for (BlockId f : dom.frontier[b]) {
            if (result.insert(f).second && queued.insert(f).second) {
                work.push_back(f);
            }
        }
    }
    return result;
}

namespace {

class Renamer {
public:
    Renamer(SsaCfg& ssa, std::vector<std::vector<BlockId>> preds) : ssa_(ssa), preds_(std::move(preds)) {}

    void run() {
        if (!ssa_.cfg.blocks.empty()) {
            rename(0);
        }
    }

private:
    Var fresh(const std::string& base) {
        const int n = ++counter_[base];
        ++ssa_.version_count;
        return base + "." + std::to_string(n);
    }

    Var current(const std::string& base, const SourceLoc& loc) {
        auto it = stacks_.find(base);
        if (it == stacks_.end() || it->second.empty()) {
            throw UseBeforeDefError("variable '" + base + "' used before definition at " + loc.str());
        }
        return it->second.back();
    }

    void rename(BlockId b) {
        std::vector<std::string> pushed;
        BasicBlock& block = ssa_.cfg.blocks[b];
        for (Phi& phi : block.phis) {
            const std::string base = phi.dst;
            phi.dst = fresh(base);
            stacks_[base].push_back(phi.dst);
            pushed.push_back(base);
        }
        for (Instr& instr : block.instrs) {
            const SourceLoc loc = instr.loc;
            instr.rename_uses([&](const Var& v) { return current(v, loc); });
            if (auto d = instr.def()) {
                const std::string base = *d;
                instr.dst = fresh(base);
                stacks_[base].push_back(instr.dst);
                pushed.push_back(base);
            }
        }
        Terminator& term = block.term;
        if (term.kind == Terminator::Kind::Branch) {
            if (term.cond.lhs.is_var()) {
                term.cond.lhs = Operand::of_var(current(term.cond.lhs.var(), term.loc));
            }
            if (term.cond.rhs.is_var()) {
                term.cond.rhs = Operand::of_var(current(term.cond.rhs.var(), term.loc));
            }
        }
        for (BlockId s : term.successors()) {
            for (Phi& phi : ssa_.cfg.blocks[s].phis) {
                const std::string base = base_name(phi.dst);
                for (auto& [pred, value] : phi.args) {
                    if (pred == b) {
                        auto it = stacks_.find(base);
                        value = (it == stacks_.end() || it->second.empty()) ? Var{} : it->second.back();
                    }
                }
            }
        }
        for (BlockId c : ssa_.dom.children[b]) {
            rename(c);
        }
        for (const auto& base : pushed) {
            stacks_[base].pop_back();
        }
    }

    SsaCfg& ssa_;
    std::vector<std::vector<BlockId>> preds_;
    std::map<std::string, std::vector<Var>> stacks_;
    std::map<std::string, int> counter_;
};

}  // namespace

SsaCfg to_ssa(const Cfg& cfg, const DomInfo& dom) {
    if (dom.idom.size() != cfg.blocks.size()) {
        throw UnreachableBlockError("dominator info does not match the CFG");
    }
    SsaCfg ssa;
    ssa.cfg = cfg;
    ssa.dom = dom;
    const auto preds = cfg.predecessors();

    std::map<std::string, std::set<BlockId>> def_blocks;
    for (const auto& b : cfg.blocks) {
        for (const auto& i : b.instrs) {
            if (auto d = i.def()) {
                def_blocks[*d].insert(b.id);
            }
        }
    }
    for (const auto& [var, blocks] : def_blocks) {
        auto sites = iterated_frontier(dom, blocks);
        for (BlockId site : sites) {
            Phi phi;
            phi.dst = var;
            for (BlockId p : preds[site]) {
                phi.args.emplace_back(p, Var{});
            }
            ssa.cfg.blocks[site].phis.push_back(std::move(phi));
            ++ssa.phi_count;
        }
        if (!sites.empty()) {
            ssa.phi_sites[var] = std::move(sites);
        }
    }

    Renamer(ssa, preds).run();
    ssa.var_count = def_blocks.size();

    // A phi with an undefined incoming value (directly or through other
    // phis) means some path reaches it without a definition.
    std::set<Var> maybe_undef;
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& b : ssa.cfg.blocks) {
            for (const auto& phi : b.phis) {
                if (maybe_undef.contains(phi.dst)) {
                    continue;
                }
                for (const auto& [_, v] : phi.args) {
                    if (v.empty() || maybe_undef.contains(v)) {
                        maybe_undef.insert(phi.dst);
                        changed = true;
                        break;
                    }
                }
            }
        }
    }
    auto check = [&](const std::vector<Var>& uses, const SourceLoc& loc) {
        for (const auto& u : uses) {
            if (maybe_undef.contains(u)) {
                throw UseBeforeDefError("variable '" + base_name(u) + "' may be used before definition at " +
                                        loc.str());
            }
        }
    };
    for (const auto& b : ssa.cfg.blocks) {
        for (const auto& i : b.instrs) {
            check(i.uses(), i.loc);
        }
        check(b.term.uses(), b.term.loc);
    }
    return ssa;
}

std::string dump_ssa(const SsaCfg& ssa, const SeqProgram* program) {
    std::ostringstream os;
    os << "ssa vars=" << ssa.var_count << " versions=" << ssa.version_count << " phis=" << ssa.phi_count << "\n";
    os << "idom:";
    for (BlockId b = 0; b < ssa.dom.idom.size(); ++b) {
        os << " b" << b << "->b" << ssa.dom.idom[b];
    }
    os << "\nfrontiers:\n";
    for (BlockId b = 0; b < ssa.dom.frontier.size(); ++b) {
        if (ssa.dom.frontier[b].empty()) {
            continue;
        }
        os << "  DF(b" << b << ") = {";
        bool first = true;
        for (BlockId f : ssa.dom.frontier[b]) {
            os << (first ? "" : ", ") << "b" << f;
            first = false;
        }
        os << "}\n";
    }
    os << dump_cfg(ssa.cfg, program);
    return os.str();
}

}  // namespace bell
