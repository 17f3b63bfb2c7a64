#include "bell/sim.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include <json.hpp>

#include "bell/errors.hpp"

namespace bell {

InstrClass instr_class(Op op) {
    switch (op) {
    case Op::ADD:
    case Op::SUB:
    case Op::SLT:
    case Op::ADDI:
    case Op::SLTI:
    case Op::LUI: return InstrClass::Alu;
    case Op::BEQ:
    case Op::BNE:
    case Op::BLT:
    case Op::BGE: return InstrClass::Branch;
    case Op::JAL: return InstrClass::Jump;
    case Op::LW:
    case Op::SW: return InstrClass::Mem;
    case Op::STEP:
    case Op::STEPR: return InstrClass::Step;
    default: return InstrClass::Sync;
    }
}

std::string_view to_string(InstrClass c) {
    switch (c) {
    case InstrClass::Alu: return "alu";
    case InstrClass::Branch: return "branch";
    case InstrClass::Jump: return "jump";
    case InstrClass::Mem: return "mem";
    case InstrClass::Step: return "step";
    case InstrClass::Sync: return "sync";
    }
    return "?";
}

std::int64_t TimingModel::cost(Op op) const { return instr_cost_ticks.at(instr_class(op)); }

void TimingModel::validate() const {
    if (tick_ns <= 0) {
        throw ValidationError("timing: tick_ns must be positive");
    }
    for (auto c : {InstrClass::Alu, InstrClass::Branch, InstrClass::Jump, InstrClass::Mem, InstrClass::Step,
                   InstrClass::Sync}) {
        auto it = instr_cost_ticks.find(c);
        if (it == instr_cost_ticks.end() || it->second < 1) {
            throw ValidationError("timing: cost of class '" + std::string(to_string(c)) + "' must be >= 1");
        }
    }
    if (readcnt_delay_ticks < 0 || readcnt_delay_ticks * tick_ns >= 100) {
        throw ValidationError("timing: counter readout delay must be under 100 ns");
    }
    if (bcast_delay_ticks < 0 || bcast_delay_ticks * tick_ns >= 100) {
        throw ValidationError("timing: broadcast delay must be under 100 ns");
    }
    if (barrier_release_ticks < 0 || waithost_resume_ticks < 0 || step_queue_depth < 1) {
        throw ValidationError("timing: negative delay or empty step queue");
    }
}

TimingModel parse_timing_model(const std::string& json_text) {
    TimingModel tm;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("timing model: ") + e.what());
    }
    if (!j.is_object()) {
        throw SchemaError("timing model must be a JSON object");
    }
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "tick_ns") {
                tm.tick_ns = v.get<int>();
            } else if (key == "instr_cost_ticks") {
                for (const auto& [cls, cost] : v.items()) {
                    bool found = false;
                    for (auto c : {InstrClass::Alu, InstrClass::Branch, InstrClass::Jump, InstrClass::Mem,
                                   InstrClass::Step, InstrClass::Sync}) {
                        if (to_string(c) == cls) {
                            tm.instr_cost_ticks[c] = cost.get<std::int64_t>();
                            found = true;
                        }
                    }
                    if (!found) {
                        throw SchemaError("timing model: unknown instruction class '" + cls + "'");
                    }
                }
            } else if (key == "readcnt_delay_ticks") {
                tm.readcnt_delay_ticks = v.get<std::int64_t>();
            } else if (key == "bcast_delay_ticks") {
                tm.bcast_delay_ticks = v.get<std::int64_t>();
            } else if (key == "barrier_release_ticks") {
                tm.barrier_release_ticks = v.get<std::int64_t>();
            } else if (key == "waithost_resume_ticks") {
                tm.waithost_resume_ticks = v.get<std::int64_t>();
            } else if (key == "waithost_resume_by_tag") {
                tm.waithost_resume_by_tag = v.get<std::map<std::string, std::int64_t>>();
            } else if (key == "step_queue_depth") {
                tm.step_queue_depth = v.get<std::size_t>();
            } else {
                throw SchemaError("timing model: unknown field '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("timing model: ") + e.what());
    }
    tm.validate();
    return tm;
}

std::string timing_model_json(const TimingModel& tm) {
    nlohmann::ordered_json j;
    j["tick_ns"] = tm.tick_ns;
    for (const auto& [c, cost] : tm.instr_cost_ticks) {
        j["instr_cost_ticks"][std::string(to_string(c))] = cost;
    }
    j["readcnt_delay_ticks"] = tm.readcnt_delay_ticks;
    j["bcast_delay_ticks"] = tm.bcast_delay_ticks;
    j["barrier_release_ticks"] = tm.barrier_release_ticks;
    j["waithost_resume_ticks"] = tm.waithost_resume_ticks;
    j["waithost_resume_by_tag"] = tm.waithost_resume_by_tag;
    j["step_queue_depth"] = tm.step_queue_depth;
    return j.dump(2) + "\n";
}

const BoardRun& SimTrace::board(const std::string& id) const {
    for (const auto& b : boards) {
        if (b.board_id == id) {
            return b;
        }
    }
    throw ValidationError("no board '" + id + "' in trace");
}

namespace {

enum class Wait { Run, Barrier, WaitHost, Halted };

struct Board {
    const BoardProgram* prog = nullptr;
    const StepTable* table = nullptr;
    std::size_t pc = 0;
    std::int64_t ptime = 0;
    std::vector<std::int32_t> regs = std::vector<std::int32_t>(32, 0);
    std::vector<std::int32_t> frame;
    Wait wait = Wait::Run;
    std::int64_t hw_end = 0;
    std::deque<std::int64_t> pending_starts;
    bool arrived = false;
    std::int64_t arrival = 0;
    BoardRun run;
};

class Simulator {
public:
    Simulator(const std::map<std::string, BoardProgram>& programs, const std::map<std::string, StepTable>& tables,
              const TimingModel& tm, DetectionScript ds, const SimOptions& options)
        : tm_(tm), ds_(std::move(ds)), options_(options) {
        tm_.validate();
        for (const auto& [id, prog] : programs) {
            auto t = tables.find(id);
            if (t == tables.end()) {
                throw StepIndexError("no step table for board '" + id + "'");
            }
            Board b;
            b.prog = &prog;
            b.table = &t->second;
            b.frame.assign(options.frame_slots, 0);
            b.run.board_id = id;
            trace_.board_ids.push_back(id);
            boards_.push_back(std::move(b));
        }
        trace_.tick_ns = tm.tick_ns;
    }

    SimTrace run() {
        for (;;) {
            Board* next = nullptr;
            std::size_t next_i = 0;
            for (std::size_t i = 0; i < boards_.size(); ++i) {
                Board& b = boards_[i];
                if (b.wait == Wait::Run && (next == nullptr || b.ptime < next->ptime)) {
                    next = &b;
                    next_i = i;
                }
            }
            if (next == nullptr) {
                if (std::all_of(boards_.begin(), boards_.end(), [](const Board& b) { return b.wait == Wait::Halted; })) {
                    break;
                }
                throw DeadlockError(deadlock_report());
            }
            if (next->ptime > options_.max_ticks) {
                throw MaxTicksExceeded("simulation passed " + std::to_string(options_.max_ticks) + " ticks");
            }
            step(next_i);
        }
        std::stable_sort(trace_.events.begin(), trace_.events.end(), [](const TraceEvent& a, const TraceEvent& b) {
            return a.tick != b.tick ? a.tick < b.tick : a.board < b.board;
        });
        for (auto& b : boards_) {
            b.run.regs = b.regs;
            trace_.end_tick = std::max({trace_.end_tick, b.run.halt_tick, b.hw_end});
            trace_.boards.push_back(std::move(b.run));
        }
        return std::move(trace_);
    }

private:
    void event(std::size_t board, std::int64_t tick, std::string kind, std::string payload) {
        trace_.events.push_back({tick, board, std::move(kind), std::move(payload)});
    }

    std::string deadlock_report() const {
        std::ostringstream os;
        os << "no board can make progress:";
        for (const auto& b : boards_) {
            os << " " << b.run.board_id << "="
               << (b.wait == Wait::Barrier ? "barrier" : b.wait == Wait::WaitHost ? "waithost" : "halted") << "@pc"
               << b.pc;
        }
        return os.str();
    }

    Board* broadcaster() {
        for (auto& b : boards_) {
            if (b.prog->broadcaster) {
                return &b;
            }
        }
        return nullptr;
    }

    void try_release_barrier() {
        Board* bc = broadcaster();
        if (bc == nullptr || bc->wait != Wait::Barrier) {
            return;
        }
        std::int64_t last = 0;
        for (const auto& b : boards_) {
            if (!b.arrived) {
                return;
            }
            last = std::max(last, b.arrival);
        }
        const std::int64_t release = last + tm_.barrier_release_ticks;
        FeedbackCycle c;
        c.id = trace_.cycles.size();
        c.detect_close = bc->arrival;
        trace_.cycles.push_back(c);
        for (auto& b : boards_) {
            b.arrived = false;
        }
        bc->wait = Wait::Run;
        bc->ptime = release;
        event(static_cast<std::size_t>(bc - boards_.data()), release, "barrier_release",
              "{\"cycle\":" + std::to_string(c.id) + "}");
    }

    void try_release_waithost(const std::string& tag) {
        std::int64_t last = 0;
        for (const auto& b : boards_) {
            if (b.wait != Wait::WaitHost) {
                return;
            }
            last = std::max(last, b.arrival);
        }
        auto it = tm_.waithost_resume_by_tag.find(tag);
        const std::int64_t resume = last + (it == tm_.waithost_resume_by_tag.end() ? tm_.waithost_resume_ticks : it->second);
        for (std::size_t i = 0; i < boards_.size(); ++i) {
            boards_[i].wait = Wait::Run;
            boards_[i].ptime = resume;
            event(i, resume, "waithost_resume", "{}");
        }
    }

    std::size_t frame_index(Board& b, std::int32_t addr) {
        if (addr < 0 || addr % 4 != 0 || static_cast<std::size_t>(addr / 4) >= b.frame.size()) {
            throw MemoryFaultError("board " + b.run.board_id + ": frame address " + std::to_string(addr) +
                                   " out of range at pc " + std::to_string(b.pc));
        }
        return static_cast<std::size_t>(addr / 4);
    }

    void step(std::size_t bi) {
        Board& b = boards_[bi];
        if (b.pc >= b.prog->lines.size()) {
            throw MemoryFaultError("board " + b.run.board_id + ": pc " + std::to_string(b.pc) + " past program end");
        }
        const AsmLine& line = b.prog->lines[b.pc];
        const MachineInstr& m = line.instr;
        const std::int64_t t = b.ptime;
        const std::int64_t cost = tm_.cost(m.op);
        std::size_t next_pc = b.pc + 1;
        std::int64_t done = t + cost;
        auto rs1 = [&] { return m.rs1 == 0 ? 0 : b.regs[m.rs1]; };
        auto rs2 = [&] { return m.rs2 == 0 ? 0 : b.regs[m.rs2]; };
        auto write = [&](std::int32_t v) {
            if (m.rd != 0) {
                b.regs[m.rd] = v;
            }
        };
        auto branch = [&](bool taken) {
            if (taken) {
                next_pc = static_cast<std::size_t>(static_cast<std::int64_t>(b.pc) + m.imm);
            }
        };

        switch (m.op) {
        case Op::ADD: write(wrap_add(rs1(), rs2())); break;
        case Op::SUB: write(wrap_sub(rs1(), rs2())); break;
        case Op::SLT: write(rs1() < rs2() ? 1 : 0); break;
        case Op::ADDI: write(wrap_add(rs1(), m.imm)); break;
        case Op::SLTI: write(rs1() < m.imm ? 1 : 0); break;
        case Op::LUI: write(static_cast<std::int32_t>(static_cast<std::uint32_t>(m.imm) << 12)); break;
        case Op::LW: write(b.frame[frame_index(b, wrap_add(rs1(), m.imm))]); break;
        case Op::SW: b.frame[frame_index(b, wrap_add(rs1(), m.imm))] = rs2(); break;
        case Op::BEQ: branch(rs1() == rs2()); break;
        case Op::BNE: branch(rs1() != rs2()); break;
        case Op::BLT: branch(rs1() < rs2()); break;
        case Op::BGE: branch(rs1() >= rs2()); break;
        case Op::JAL:
            write(static_cast<std::int32_t>(b.pc + 1));
            branch(true);
            break;
        case Op::STEP:
        case Op::STEPR: {
            const auto idx = static_cast<std::uint32_t>(m.op == Op::STEP ? m.imm : rs1());
            if (idx >= b.table->entries.size()) {
                throw StepIndexError("board " + b.run.board_id + ": step index " + std::to_string(idx) +
                                     " outside table of " + std::to_string(b.table->entries.size()));
            }
            while (!b.pending_starts.empty() && b.pending_starts.front() <= t) {
                b.pending_starts.pop_front();
            }
            if (b.pending_starts.size() >= tm_.step_queue_depth) {
                b.ptime = b.pending_starts.front();  // queue full: retry when a slot frees
                return;
            }
            StepRecord s;
            s.ordinal = b.run.steps.size();
            s.index = idx;
            s.issue = t;
            s.start = std::max(b.hw_end, t + cost);
            s.end = s.start + b.table->entries[idx].duration_ticks;
            s.feedback = line.feedback_step;
            b.hw_end = s.end;
            b.pending_starts.push_back(s.start);
            const std::string payload = "{\"ordinal\":" + std::to_string(s.ordinal) + ",\"index\":" +
                                        std::to_string(idx) + (s.feedback ? ",\"feedback\":true}" : "}");
            event(bi, s.start, "step_start", payload);
            event(bi, s.end, "step_end", payload);
            b.run.steps.push_back(s);
            break;
        }
        case Op::BARRIER:
            b.arrived = true;
            b.arrival = std::max(done, b.hw_end);
            b.wait = Wait::Barrier;
            event(bi, b.arrival, "barrier_wait", "{}");
            break;
        case Op::READCNT: {
            const std::int32_t v = ds_.next();
            write(v);
            done += tm_.readcnt_delay_ticks;
            event(bi, done, "readcnt", "{\"channel\":" + std::to_string(m.imm) + ",\"value\":" + std::to_string(v) + "}");
            break;
        }
        case Op::BCASTR: {
            const std::int64_t release = t + tm_.bcast_delay_ticks;
            mailbox_ = rs1();
            mailbox_release_ = release;
            mailbox_valid_ = true;
            for (std::size_t i = 0; i < boards_.size(); ++i) {
                if (i != bi && boards_[i].wait == Wait::Barrier) {
                    boards_[i].wait = Wait::Run;
                    boards_[i].ptime = release;
                }
            }
            if (!trace_.cycles.empty() && trace_.cycles.back().bcast_issue == 0) {
                trace_.cycles.back().bcast_issue = t;
                trace_.cycles.back().release = release;
                trace_.cycles.back().value = mailbox_;
            }
            done = release + cost;
            event(bi, t, "bcast", "{\"value\":" + std::to_string(mailbox_) + ",\"release\":" + std::to_string(release) + "}");
            break;
        }
        case Op::RECV:
            if (!mailbox_valid_ || t < mailbox_release_) {
                trace_.protocol_violations.push_back("board " + b.run.board_id + " RECV at tick " + std::to_string(t) +
                                                     " before broadcast release");
            }
            write(mailbox_);
            event(bi, t, "recv", "{\"value\":" + std::to_string(mailbox_) + "}");
            break;
        case Op::WAITHOST:
            b.arrival = std::max(done, b.hw_end);
            b.wait = Wait::WaitHost;
            event(bi, b.arrival, "waithost", "{\"tag\":" + std::to_string(m.imm) + "}");
            break;
        case Op::HALT:
            b.wait = Wait::Halted;
            b.run.halt_tick = t;
            event(bi, t, "halt", "{}");
            break;
        }

        if (options_.record_exec) {
            event(bi, t, "exec", "{\"pc\":" + std::to_string(b.pc) + ",\"instr\":\"" + disasm(m) + "\"}");
        }
        if (!line.def_var.empty()) {
            b.run.defs.push_back({line.def_var, b.regs[m.rd]});
        }
        ++b.run.executed;
        b.pc = next_pc;
        if (b.wait == Wait::Run) {
            b.ptime = done;
        }
        if (m.op == Op::BARRIER) {
            try_release_barrier();
        } else if (m.op == Op::WAITHOST) {
            const auto& tags = b.prog->host_tags;
            try_release_waithost(static_cast<std::size_t>(m.imm) < tags.size() ? tags[m.imm] : std::to_string(m.imm));
        }
    }

    TimingModel tm_;
    DetectionScript ds_;
    SimOptions options_;
    std::vector<Board> boards_;
    SimTrace trace_;
    std::int32_t mailbox_ = 0;
    std::int64_t mailbox_release_ = 0;
    bool mailbox_valid_ = false;
};

}  // namespace

SimTrace simulate(const std::map<std::string, BoardProgram>& programs, const std::map<std::string, StepTable>& tables,
                  const TimingModel& tm, DetectionScript ds, const SimOptions& options) {
    return Simulator(programs, tables, tm, std::move(ds), options).run();
}

std::vector<LatencyRecord> measure_feedback_latency(const SimTrace& t, const std::optional<std::string>& board) {
    std::vector<LatencyRecord> out;
    if (t.boards.empty()) {
        throw NoFeedbackCycleError("empty trace");
    }
    const BoardRun* ref = &t.boards.front();
    if (board) {
        ref = &t.board(*board);
    }
    for (const auto& c : t.cycles) {
        auto it = std::find_if(ref->steps.begin(), ref->steps.end(),
                               [&](const StepRecord& s) { return s.start >= c.detect_close; });
        if (it == ref->steps.end() || !it->feedback) {
            continue;
        }
        LatencyRecord r;
        r.id = c.id;
        r.detect_close = c.detect_close;
        r.step_start = it->start;
        r.ticks = it->start - c.detect_close;
        r.latency_ns = static_cast<double>(r.ticks * t.tick_ns);
        out.push_back(r);
    }
    if (out.empty()) {
        throw NoFeedbackCycleError("no counter read was followed by a conditional step");
    }
    return out;
}

LockstepReport assert_lockstep(const SimTrace& t) {
    LockstepReport r;
    if (t.boards.size() < 2) {
        return r;
    }
    const auto& ref = t.boards.front();
    for (std::size_t bi = 1; bi < t.boards.size(); ++bi) {
        const auto& other = t.boards[bi];
        const std::size_t n = std::min(ref.steps.size(), other.steps.size());
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = ref.steps[i];
            const auto& b = other.steps[i];
            if (a.start != b.start || a.end != b.end) {
                if (!r.ordinal || i < *r.ordinal) {
                    r.ok = false;
                    r.ordinal = i;
                    r.message = "step " + std::to_string(i) + ": " + ref.board_id + " [" + std::to_string(a.start) +
                                ", " + std::to_string(a.end) + ") vs " + other.board_id + " [" +
                                std::to_string(b.start) + ", " + std::to_string(b.end) + ")";
                }
                break;
            }
        }
        if (r.ok && ref.steps.size() != other.steps.size()) {
            r.ok = false;
            r.ordinal = n;
            r.message = ref.board_id + " ran " + std::to_string(ref.steps.size()) + " steps, " + other.board_id +
                        " ran " + std::to_string(other.steps.size());
        }
    }
    return r;
}

std::map<std::string, std::int32_t> final_variables(const SimTrace& t) {
    std::map<std::string, std::int32_t> out;
    if (t.boards.empty()) {
        return out;
    }
    for (const auto& b : t.boards) {
        if (b.defs != t.boards.front().defs) {
            throw ValidationError("definition logs of " + t.boards.front().board_id + " and " + b.board_id +
                                  " differ");
        }
    }
    for (const auto& d : t.boards.front().defs) {
        out[d.var] = d.value;
    }
    return out;
}

std::int64_t timeline_span(const SimTrace& t) {
    std::optional<std::int64_t> first;
    std::int64_t last = 0;
    for (const auto& b : t.boards) {
        for (const auto& s : b.steps) {
            first = first ? std::min(*first, s.start) : s.start;
            last = std::max(last, s.end);
        }
    }
    return first ? last - *first : 0;
}

std::string trace_jsonl(const SimTrace& t) {
    std::string out;
    for (const auto& e : t.events) {
        out += "{\"tick\":" + std::to_string(e.tick) + ",\"board\":" + nlohmann::json(t.board_ids[e.board]).dump() +
               ",\"kind\":\"" + e.kind + "\",\"data\":" + e.payload + "}\n";
    }
    return out;
}

std::string trace_summary_json(const SimTrace& t, const std::vector<LatencyRecord>& latency) {
    nlohmann::ordered_json j;
    j["end_tick"] = t.end_tick;
    j["tick_ns"] = t.tick_ns;
    j["timeline_span_ticks"] = timeline_span(t);
    j["boards"] = nlohmann::ordered_json::array();
    for (const auto& b : t.boards) {
        j["boards"].push_back({{"board", b.board_id},
                               {"steps", b.steps.size()},
                               {"instructions", b.executed},
                               {"halt_tick", b.halt_tick}});
    }
    j["cycles"] = nlohmann::ordered_json::array();
    for (const auto& c : t.cycles) {
        j["cycles"].push_back({{"id", c.id},
                               {"detect_close_tick", c.detect_close},
                               {"bcast_tick", c.bcast_issue},
                               {"release_tick", c.release},
                               {"value", c.value}});
    }
    j["latency"] = nlohmann::ordered_json::array();
    for (const auto& r : latency) {
        j["latency"].push_back({{"id", r.id},
                                {"detect_window_close_tick", r.detect_close},
                                {"conditional_step_start_tick", r.step_start},
                                {"ticks", r.ticks},
                                {"latency_ns", r.latency_ns}});
    }
    const LockstepReport ls = assert_lockstep(t);
    j["lockstep"] = {{"ok", ls.ok}, {"message", ls.message}};
    j["protocol_violations"] = t.protocol_violations;
    try {
        j["final_vars"] = final_variables(t);
    } catch (const Error& e) {
        j["final_vars_error"] = e.what();
    }
    return j.dump(2) + "\n";
}

}  // namespace bell
