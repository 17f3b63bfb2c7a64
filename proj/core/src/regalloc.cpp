#include "bell/regalloc.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "bell/errors.hpp"

namespace bell {
namespace {

bool is_spill_temp(const Var& v) { return v.find(".s") != std::string::npos; }

constexpr int kMaxRounds = 8;

}  // namespace

void RegFile::validate() const {
    if (total < 4 || total > 32) {
        throw AllocationError("register file must have between 4 and 32 registers, got " + std::to_string(total));
    }
}

Allocation allocate(const InterferenceGraph& g, const RegFile& rf) {
    rf.validate();
    const std::size_t k = static_cast<std::size_t>(rf.colors());
    Allocation out;
    out.max_pressure = g.max_pressure;

    std::map<Var, std::size_t> degree;
    std::set<Var> remaining(g.nodes.begin(), g.nodes.end());
    for (const auto& v : g.nodes) {
        degree[v] = g.degree(v);
    }
    std::vector<Var> stack;
    auto remove = [&](Var v) {  // by value: v may alias an element of remaining
        remaining.erase(v);
        stack.push_back(v);
        for (const auto& w : g.adj.at(v)) {
            if (remaining.contains(w)) {
                --degree[w];
            }
        }
    };

    while (!remaining.empty()) {
        auto low = std::find_if(remaining.begin(), remaining.end(), [&](const Var& v) { return degree[v] < k; });
        if (low != remaining.end()) {
            remove(*low);
            continue;
        }
        // Blocked: push the cheapest candidate (cost / degree) and hope.
        const Var* best = nullptr;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (const auto& v : remaining) {
            const double cost = is_spill_temp(v) ? std::numeric_limits<double>::infinity() : g.cost.at(v);
            const double ratio = cost / static_cast<double>(std::max<std::size_t>(degree[v], 1));
            if (best == nullptr || ratio < best_ratio) {
                best = &v;
                best_ratio = ratio;
            }
        }
        remove(*best);
    }

    while (!stack.empty()) {
        const Var v = stack.back();
        stack.pop_back();
        std::set<int> taken;
        for (const auto& w : g.adj.at(v)) {
            if (auto it = out.reg.find(w); it != out.reg.end()) {
                taken.insert(it->second);
            }
        }
        int chosen = 0;
        if (auto partners = g.copy_pairs.find(v); partners != g.copy_pairs.end()) {
            for (const auto& p : partners->second) {
                auto it = out.reg.find(p);
                if (it != out.reg.end() && !taken.contains(it->second)) {
                    chosen = it->second;
                    break;
                }
            }
        }
        // Otherwise prefer a color that uncolored partners could still share.
        std::set<int> partner_blocked = taken;
        if (auto partners = g.copy_pairs.find(v); partners != g.copy_pairs.end()) {
            for (const auto& p : partners->second) {
                for (const auto& w : g.adj.at(p)) {
                    if (auto it = out.reg.find(w); it != out.reg.end()) {
                        partner_blocked.insert(it->second);
                    }
                }
            }
        }
        for (int c = 1; chosen == 0 && c <= rf.colors(); ++c) {
            if (!partner_blocked.contains(c)) {
                chosen = c;
            }
        }
        for (int c = 1; chosen == 0 && c <= rf.colors(); ++c) {
            if (!taken.contains(c)) {
                chosen = c;
            }
        }
        if (chosen == 0) {
            out.spilled.insert(v);
        } else {
            out.reg[v] = chosen;
        }
    }
    out.spill_count = out.spilled.size();
    out.rounds = 1;
    return out;
}

Cfg insert_spill_code(const Cfg& cfg, const Allocation& a, std::map<Var, int>& slots, int frame_slots) {
    if (a.spilled.empty()) {
        return cfg;
    }
    for (const auto& v : a.spilled) {
        if (!slots.contains(v)) {
            const int next = static_cast<int>(slots.size());
            if (next >= frame_slots) {
                throw FrameOverflowError("spill frame exhausted: " + std::to_string(frame_slots) + " slots");
            }
            slots[v] = next;
        }
    }
    const auto existing = cfg.variables();
    const std::set<Var> taken(existing.begin(), existing.end());
    int counter = 0;
    auto fresh = [&](const Var& v) {
        Var name;
        do {
            name = v + ".s" + std::to_string(counter++);
        } while (taken.contains(name));
        return name;
    };

    Cfg out = cfg;
    for (auto& b : out.blocks) {
        std::vector<Instr> rewritten;
        for (Instr instr : b.instrs) {
            std::map<Var, Var> loaded;
            for (const auto& u : instr.uses()) {
                if (a.spilled.contains(u) && !loaded.contains(u)) {
                    loaded[u] = fresh(u);
                    rewritten.push_back(Instr::load(loaded[u], slots.at(u), instr.loc));
                }
            }
            instr.rename_uses([&](const Var& v) {
                auto it = loaded.find(v);
                return it == loaded.end() ? v : it->second;
            });
            std::optional<Instr> store;
            if (auto d = instr.def(); d && a.spilled.contains(*d)) {
                instr.dst = fresh(*d);
                store = Instr::store(instr.dst, slots.at(*d), instr.loc);
            }
            // Receiving boards write the broadcast word into the operand
            // register, so a spilled broadcast value is stored back.
            if (instr.kind == Instr::Kind::Broadcast && !loaded.empty()) {
                const auto& [orig, temp] = *loaded.begin();
                store = Instr::store(temp, slots.at(orig), instr.loc);
            }
            rewritten.push_back(std::move(instr));
            if (store) {
                rewritten.push_back(std::move(*store));
            }
        }
        std::map<Var, Var> loaded;
        for (const auto& u : b.term.uses()) {
            if (a.spilled.contains(u) && !loaded.contains(u)) {
                loaded[u] = fresh(u);
                rewritten.push_back(Instr::load(loaded[u], slots.at(u), b.term.loc));
            }
        }
        auto rename = [&](Operand& o) {
            if (o.is_var()) {
                if (auto it = loaded.find(o.var()); it != loaded.end()) {
                    o = Operand::of_var(it->second);
                }
            }
        };
        rename(b.term.cond.lhs);
        rename(b.term.cond.rhs);
        b.instrs = std::move(rewritten);
    }
    return out;
}

Cfg insert_spill_code(const Cfg& cfg, const Allocation& a, int frame_slots) {
    std::map<Var, int> slots;
    return insert_spill_code(cfg, a, slots, frame_slots);
}

AllocatedProgram allocate_registers(const Cfg& cfg, const RegFile& rf, int frame_slots) {
    rf.validate();
    AllocatedProgram result;
    result.cfg = cfg;
    std::set<Var> all_spilled;
    std::map<Var, int> slots;
    std::size_t first_pressure = 0;
    for (int round = 1; round <= kMaxRounds; ++round) {
        const LiveInfo live = compute_liveness(result.cfg);
        InterferenceGraph g = build_interference(result.cfg, live);
        if (round == 1) {
            first_pressure = g.max_pressure;
        }
        Allocation a = allocate(g, rf);
        if (a.spilled.empty()) {
            a.spilled = all_spilled;
            a.slot = slots;
            a.spill_count = all_spilled.size();
            a.max_pressure = first_pressure;
            a.rounds = round;
            verify_allocation(g, a, rf);
            result.allocation = std::move(a);
            result.graph = std::move(g);
            return result;
        }
        all_spilled.insert(a.spilled.begin(), a.spilled.end());
        result.cfg = insert_spill_code(result.cfg, a, slots, frame_slots);
    }
    throw AllocationError("register allocation did not converge within " + std::to_string(kMaxRounds) + " rounds");
}

void verify_allocation(const InterferenceGraph& g, const Allocation& a, const RegFile& rf) {
    for (const auto& v : g.nodes) {
        auto it = a.reg.find(v);
        if (it == a.reg.end()) {
            throw AllocationError("variable '" + v + "' has no register");
        }
        if (it->second <= rf.zero() || it->second >= rf.scratch()) {
            throw AllocationError("variable '" + v + "' assigned reserved register x" + std::to_string(it->second));
        }
        for (const auto& w : g.adj.at(v)) {
            if (a.reg.at(w) == it->second) {
                throw AllocationError("interfering variables '" + v + "' and '" + w + "' share x" +
                                      std::to_string(it->second));
            }
        }
    }
}

std::string dump_allocation(const Allocation& a, const RegFile& rf) {
    std::ostringstream os;
    os << "alloc registers=" << rf.total << " colors=" << rf.colors() << " scratch=x" << rf.scratch()
       << " spills=" << a.spill_count << " max_pressure=" << a.max_pressure << " rounds=" << a.rounds << "\n";
    for (const auto& [v, r] : a.reg) {
        os << v << " -> x" << r << "\n";
    }
    for (const auto& [v, s] : a.slot) {
        os << v << " -> [" << s << "]\n";
    }
    return os.str();
}

}  // namespace bell
