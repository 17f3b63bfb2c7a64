#include "bell/liveness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bell/errors.hpp"

namespace bell {
namespace {

// Emits the parallel copy {dst_i <- src_i} as a sequence of copies.
void sequentialize(std::vector<std::pair<Var, Var>> pending, std::vector<Instr>& out, int& temp_counter) {
    pending.erase(std::remove_if(pending.begin(), pending.end(), [](const auto& c) { return c.first == c.second; }),
                  pending.end());
    while (!pending.empty()) {
        auto ready = std::find_if(pending.begin(), pending.end(), [&](const auto& c) {
            return std::none_of(pending.begin(), pending.end(), [&](const auto& o) { return o.second == c.first; });
        });
        if (ready != pending.end()) {
            out.push_back(Instr::copy(ready->first, ready->second));
            pending.erase(ready);
            continue;
        }
        // Every destination is still needed as a source: a cycle. Save the
        // first destination's old value and redirect its readers.
        const Var saved = pending.front().first;
        const Var temp = "%pc" + std::to_string(temp_counter++);
        out.push_back(Instr::copy(temp, saved));
        for (auto& c : pending) {
            if (c.second == saved) {
                c.second = temp;
            }
        }
    }
}

}  // namespace

Cfg out_of_ssa(const SsaCfg& ssa, const OutOfSsaOptions& options) {
    Cfg cfg = ssa.cfg;

    // Keep only phis whose value reaches a real use.
    std::set<Var> used;
    for (const auto& b : cfg.blocks) {
        for (const auto& i : b.instrs) {
            for (auto& u : i.uses()) {
                used.insert(u);
            }
        }
        for (auto& u : b.term.uses()) {
            used.insert(u);
        }
    }
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& b : cfg.blocks) {
            for (const auto& phi : b.phis) {
                if (!used.contains(phi.dst)) {
                    continue;
                }
                for (const auto& [_, v] : phi.args) {
                    if (!v.empty() && used.insert(v).second) {
                        changed = true;
                    }
                }
            }
        }
    }

    const auto preds = cfg.predecessors();
    int temp_counter = 0;
    const std::size_t original = cfg.blocks.size();
    for (BlockId s = 0; s < original; ++s) {
        std::vector<Phi> phis;
        for (auto& phi : cfg.blocks[s].phis) {
            if (used.contains(phi.dst)) {
                phis.push_back(phi);
            }
        }
        cfg.blocks[s].phis.clear();
        if (phis.empty()) {
            continue;
        }
        for (BlockId p : preds[s]) {
            std::vector<std::pair<Var, Var>> copies;
            for (const auto& phi : phis) {
                for (const auto& [pred, v] : phi.args) {
                    if (pred == p && !v.empty()) {
                        copies.emplace_back(phi.dst, v);
                    }
                }
            }
            if (copies.empty()) {
                continue;
            }
            BlockId at = p;
            if (cfg.blocks[p].term.successors().size() > 1) {
                if (!options.split_critical_edges) {
                    throw CriticalEdgeError("edge b" + std::to_string(p) + " -> b" + std::to_string(s) +
                                            " is critical and splitting is disabled");
                }
                BasicBlock edge;
                edge.id = cfg.blocks.size();
                edge.label = "edge";
                edge.loop_depth = cfg.blocks[p].loop_depth;
                edge.term = Terminator::jump(s);
                Terminator& t = cfg.blocks[p].term;
                if (t.target == s) {
                    t.target = edge.id;
                }
                if (t.else_target == s) {
                    t.else_target = edge.id;
                }
                for (auto& be : cfg.back_edges) {
                    if (be == std::make_pair(p, s)) {
                        be.first = edge.id;
                    }
                }
                at = edge.id;
                cfg.blocks.push_back(std::move(edge));
            }
            sequentialize(std::move(copies), cfg.blocks[at].instrs, temp_counter);
        }
    }
    return cfg;
}

LiveInfo compute_liveness(const Cfg& cfg) {
    const std::size_t n = cfg.blocks.size();
    LiveInfo info;
    info.live_in.resize(n);
    info.live_out.resize(n);

    std::vector<std::set<Var>> gen(n), kill(n);
    for (const auto& b : cfg.blocks) {
        if (!b.phis.empty()) {
            throw UnsupportedNodeError("liveness requires a phi-free CFG (block b" + std::to_string(b.id) + ")");
        }
        auto& g = gen[b.id];
        auto& k = kill[b.id];
        for (const auto& i : b.instrs) {
            for (const auto& u : i.uses()) {
                if (!k.contains(u)) {
                    g.insert(u);
                }
            }
            if (auto d = i.def()) {
                k.insert(*d);
            }
        }
        for (const auto& u : b.term.uses()) {
            if (!k.contains(u)) {
                g.insert(u);
            }
        }
    }

    for (bool changed = true; changed;) {
        changed = false;
        ++info.iterations;
        for (std::size_t k = n; k-- > 0;) {
            const BasicBlock& b = cfg.blocks[k];
            std::set<Var> out;
            for (BlockId s : b.term.successors()) {
                out.insert(info.live_in[s].begin(), info.live_in[s].end());
            }
            std::set<Var> in = gen[k];
            for (const auto& v : out) {
                if (!kill[k].contains(v)) {
                    in.insert(v);
                }
            }
            if (out != info.live_out[k] || in != info.live_in[k]) {
                info.live_out[k] = std::move(out);
                info.live_in[k] = std::move(in);
                changed = true;
            }
        }
    }
    return info;
}

std::vector<std::set<Var>> live_after_each(const Cfg& cfg, const LiveInfo& live, BlockId block) {
    const BasicBlock& b = cfg.blocks[block];
    std::vector<std::set<Var>> after(b.instrs.size());
    std::set<Var> current = live.live_out[block];
    for (const auto& u : b.term.uses()) {
        current.insert(u);
    }
    for (std::size_t k = b.instrs.size(); k-- > 0;) {
        after[k] = current;
        const Instr& i = b.instrs[k];
        if (auto d = i.def()) {
            current.erase(*d);
        }
        for (const auto& u : i.uses()) {
            current.insert(u);
        }
    }
    return after;
}

bool InterferenceGraph::interferes(const Var& a, const Var& b) const {
    auto it = adj.find(a);
    return it != adj.end() && it->second.contains(b);
}

std::size_t InterferenceGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& [_, s] : adj) {
        n += s.size();
    }
    return n / 2;
}

std::size_t InterferenceGraph::degree(const Var& v) const {
    auto it = adj.find(v);
    return it == adj.end() ? 0 : it->second.size();
}

InterferenceGraph build_interference(const Cfg& cfg, const LiveInfo& live) {
    InterferenceGraph g;
    g.nodes = cfg.variables();
    for (const auto& v : g.nodes) {
        g.adj[v];
        g.cost[v] = 0.0;
    }
    for (const auto& b : cfg.blocks) {
        const double weight = std::pow(10.0, b.loop_depth);
        const auto after = live_after_each(cfg, live, b.id);
        g.max_pressure = std::max(g.max_pressure, live.live_in[b.id].size());
        for (std::size_t k = 0; k < b.instrs.size(); ++k) {
            const Instr& i = b.instrs[k];
            for (const auto& u : i.uses()) {
                g.cost[u] += weight;
            }
            std::size_t pressure = after[k].size();
            if (auto d = i.def()) {
                g.cost[*d] += weight;
                for (const auto& v : after[k]) {
                    if (v != *d) {
                        g.adj[*d].insert(v);
                        g.adj[v].insert(*d);
                    }
                }
                if (!after[k].contains(*d)) {
                    ++pressure;
                }
                if (i.kind == Instr::Kind::Copy) {
                    g.copy_pairs[*d].insert(i.a.var());
                    g.copy_pairs[i.a.var()].insert(*d);
                }
            }
            g.max_pressure = std::max(g.max_pressure, pressure);
        }
        for (const auto& u : b.term.uses()) {
            g.cost[u] += weight;
        }
    }
    return g;
}

std::string dump_liveness(const Cfg& cfg, const LiveInfo& live) {
    std::ostringstream os;
    os << "liveness iterations=" << live.iterations << "\n";
    auto set_str = [](const std::set<Var>& s) {
        std::string out = "{";
        bool first = true;
        for (const auto& v : s) {
            out += (first ? "" : ", ") + v;
            first = false;
        }
        return out + "}";
    };
    for (const auto& b : cfg.blocks) {
        os << "b" << b.id << " in=" << set_str(live.live_in[b.id]) << " out=" << set_str(live.live_out[b.id]) << "\n";
    }
    return os.str();
}

std::string dump_interference(const InterferenceGraph& g) {
    std::ostringstream os;
    os << "igraph nodes=" << g.nodes.size() << " edges=" << g.edge_count() << " max_pressure=" << g.max_pressure
       << "\n";
    for (const auto& v : g.nodes) {
        os << v << " cost=" << g.cost.at(v) << " degree=" << g.degree(v) << " :";
        for (const auto& w : g.adj.at(v)) {
            os << " " << w;
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace bell
