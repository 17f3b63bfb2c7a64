#pragma once

// Multi-board simulator. Each board has a processor clock (instruction
// issue) and a hardware timeline (queued steps); they couple only at
// BARRIER and WAITHOST, which wait for the step queue to drain. Boards are
// stepped in (processor tick, board id) order, so a run is a pure function
// of its inputs.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bell/codegen.hpp"
#include "bell/detection.hpp"
#include "bell/interp.hpp"
#include "bell/steptable.hpp"

namespace bell {

enum class InstrClass { Alu, Branch, Jump, Mem, Step, Sync };

InstrClass instr_class(Op op);
std::string_view to_string(InstrClass c);

struct TimingModel {
    int tick_ns = 4;
    std::map<InstrClass, std::int64_t> instr_cost_ticks{
        {InstrClass::Alu, 26}, {InstrClass::Branch, 24}, {InstrClass::Jump, 26},
        {InstrClass::Mem, 26}, {InstrClass::Step, 26},   {InstrClass::Sync, 26},
    };
    std::int64_t readcnt_delay_ticks = 20;
    std::int64_t bcast_delay_ticks = 22;
    std::int64_t barrier_release_ticks = 2;
    std::int64_t waithost_resume_ticks = 250;
    std::map<std::string, std::int64_t> waithost_resume_by_tag;
    std::size_t step_queue_depth = 16;

    std::int64_t cost(Op op) const;
    // Throws ValidationError: non-positive costs, or either bus delay not
    // under 100 ns.
    void validate() const;
};

// Reads {"tick_ns", "instr_cost_ticks": {"alu": n, ...}, ...}; absent
// fields keep their defaults. Throws SchemaError / ValidationError.
TimingModel parse_timing_model(const std::string& json_text);
std::string timing_model_json(const TimingModel& tm);

struct SimOptions {
    std::int64_t max_ticks = 2'000'000'000;
    bool record_exec = true;  // one event per executed instruction
    std::size_t frame_slots = 64;
};

struct TraceEvent {
    std::int64_t tick = 0;
    std::size_t board = 0;  // index into SimTrace::board_ids
    std::string kind;       // exec, step_start, step_end, barrier_wait, barrier_release, readcnt, bcast, recv,
                            // waithost, halt
    std::string payload;    // JSON object text
};

struct StepRecord {
    std::size_t ordinal = 0;
    std::uint32_t index = 0;
    std::int64_t issue = 0;
    std::int64_t start = 0;
    std::int64_t end = 0;
    bool feedback = false;
};

struct BoardRun {
    std::string board_id;
    std::vector<StepRecord> steps;
    std::vector<DefRecord> defs;
    std::int64_t halt_tick = 0;
    std::size_t executed = 0;
    std::vector<std::int32_t> regs;
};

struct FeedbackCycle {
    std::size_t id = 0;
    std::int64_t detect_close = 0;  // broadcaster's barrier arrival
    std::int64_t bcast_issue = 0;
    std::int64_t release = 0;
    std::int32_t value = 0;
};

struct SimTrace {
    std::vector<std::string> board_ids;  // sorted
    std::vector<TraceEvent> events;      // ordered by (tick, board, emission)
    std::vector<BoardRun> boards;        // same order as board_ids
    std::vector<FeedbackCycle> cycles;
    std::vector<std::string> protocol_violations;
    std::int64_t end_tick = 0;
    int tick_ns = 4;

    const BoardRun& board(const std::string& id) const;
};

// Throws DeadlockError, StepIndexError, MaxTicksExceeded,
// DetectionScriptExhausted, MemoryFaultError.
SimTrace simulate(const std::map<std::string, BoardProgram>& programs, const std::map<std::string, StepTable>& tables,
                  const TimingModel& tm, DetectionScript ds, const SimOptions& options = {});

struct LatencyRecord {
    std::size_t id = 0;
    std::int64_t detect_close = 0;
    std::int64_t step_start = 0;
    std::int64_t ticks = 0;
    double latency_ns = 0;
};

// Cycles whose first step after the detection window is an arm-entry step
// on `board` (default: the first board in id order). Throws
// NoFeedbackCycleError when there is none.
std::vector<LatencyRecord> measure_feedback_latency(const SimTrace& t, const std::optional<std::string>& board = {});

struct LockstepReport {
    bool ok = true;
    std::optional<std::size_t> ordinal;  // first divergent step
    std::string message;
};
LockstepReport assert_lockstep(const SimTrace& t);

// Last value written per user variable on the first board; throws
// ValidationError if boards disagree on their definition logs.
std::map<std::string, std::int32_t> final_variables(const SimTrace& t);

// Hardware timeline span: last step end minus first step start.
std::int64_t timeline_span(const SimTrace& t);

std::string trace_jsonl(const SimTrace& t);
std::string trace_summary_json(const SimTrace& t, const std::vector<LatencyRecord>& latency);

}  // namespace bell
