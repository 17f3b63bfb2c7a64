#include "semantics.hpp"

#include <sstream>

#include "bell/interp.hpp"

#ifndef BELL_PROGRAMS_DIR
#error "BELL_PROGRAMS_DIR must point at the in-repo programs directory"
#endif

namespace bell::testing {

std::filesystem::path programs_dir() { return BELL_PROGRAMS_DIR; }

std::filesystem::path benchmark_path(const std::string& file) { return programs_dir() / file; }

std::string compare_with_interpreter(const CompileResult& r, const DetectionScript& ds,
                                     std::size_t max_instructions) {
    const InterpResult want = interpret(r.cfg, ds, max_instructions);
    SimOptions so;
    so.record_exec = false;
    so.frame_slots = static_cast<std::size_t>(r.alloc.allocation.slot.size() + 1);
    const SimTrace t = simulate(r.boards, r.table_map(), TimingModel{}, ds, so);

    std::ostringstream os;
    for (const auto& run : t.boards) {
        if (run.defs != want.defs) {
            os << run.board_id << ": definition log differs (" << run.defs.size() << " vs " << want.defs.size()
               << " records)";
            return os.str();
        }
        if (run.steps.size() != want.plays.size()) {
            os << run.board_id << ": " << run.steps.size() << " steps, interpreter played " << want.plays.size();
            return os.str();
        }
        for (std::size_t i = 0; i < run.steps.size(); ++i) {
            const auto entry = r.tables.state_entry.at(want.plays[i]);
            if (!entry || run.steps[i].index != *entry) {
                os << run.board_id << ": step " << i << " used entry " << run.steps[i].index;
                return os.str();
            }
        }
    }
    const auto finals = final_variables(t);
    for (const auto& [var, value] : want.final_vars) {
        if (var.empty() || var[0] == '%') {
            continue;
        }
        auto it = finals.find(var);
        if (it == finals.end() || it->second != value) {
            os << "final value of " << var << ": board " << (it == finals.end() ? "missing" : std::to_string(it->second))
               << ", interpreter " << value;
            return os.str();
        }
    }
    return {};
}

DetectionScript script_for(std::uint64_t program_seed, int n) {
    const std::uint64_t seed = program_seed * 1000003ULL + static_cast<std::uint64_t>(n);
    return DetectionScript::poisson(seed, 1.0 + (n % 7));
}

}  // namespace bell::testing
