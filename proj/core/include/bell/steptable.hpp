#pragma once

// Step tables: per-board projections of the hardware states a program
// plays, deduplicated over the whole system so that index i names the same
// step (and duration) on every board.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bell/program.hpp"

namespace bell {

// freq_word = round(f / dds_clock * 2^freq_bits)
// amp_word = round(a * (2^amp_bits - 1))
// phase_word = round(p / 2pi * 2^phase_bits) mod 2^phase_bits
struct FixedPoint {
    double dds_clock_hz = 1e9;
    int freq_bits = 32;
    int amp_bits = 14;
    int phase_bits = 16;

    bool operator==(const FixedPoint&) const = default;
};

struct DdsWord {
    std::uint32_t freq_word = 0;
    std::uint32_t amp_word = 0;
    std::uint32_t phase_word = 0;

    auto operator<=>(const DdsWord&) const = default;
};

DdsWord to_dds_word(const DdsSetting& s, const FixedPoint& fp = {});

struct StepEntry {
    std::int64_t duration_ticks = 1;
    std::map<int, DdsWord> dds;  // DDS boards: channel -> words; unset channels absent
    std::uint32_t out_mask = 0;  // TTL boards
    std::uint32_t in_mask = 0;

    auto operator<=>(const StepEntry&) const = default;
};

struct StepTable {
    std::string board_id;
    BoardKind kind = BoardKind::DDS;
    int channel_count = 1;
    std::vector<StepEntry> entries;
    std::map<std::string, std::uint32_t> index;  // played state name -> entry

    bool operator==(const StepTable&) const = default;
};

struct StepTables {
    // Program state index -> entry; nullopt for states never played.
    std::vector<std::optional<std::uint32_t>> state_entry;
    std::map<std::string, StepTable> boards;
    FixedPoint fixed_point;

    bool operator==(const StepTables&) const = default;
    std::size_t entry_count() const;
};

struct StepTableOptions {
    FixedPoint fixed_point;
    // A state that never merges with another (its entry stays private), so
    // scan points that rewrite it keep the same index layout.
    std::optional<std::string> isolate_state;
};

// Entries appear in first-play order (tree pre-order, then-arm before
// else-arm). Throws DurationMismatchError if projections disagree on a
// duration.
StepTables compile_steptables(const SeqProgram& p, const StepTableOptions& options = {});

// Versioned little-endian binary image of one table ("BSTB" magic) and
// its inverse. Throws DecodeError on malformed input.
std::vector<std::uint8_t> steptable_binary(const StepTable& t);
StepTable read_steptable_binary(const std::vector<std::uint8_t>& bytes, const std::string& board_id);
// Human-readable mirror of the binary image.
std::string steptable_json(const StepTable& t, const FixedPoint& fp, const SeqProgram* program = nullptr);

struct CompactnessRow {
    std::string name;
    std::optional<std::uint64_t> iterations;  // nullopt: unbounded (while)
    std::size_t entries = 0;
    std::optional<std::uint64_t> naive_configs;
    std::optional<std::uint64_t> reduction;
};

// Iterations n: nested loop counts multiply, sibling loops add, loops in
// if/else arms count as taken; 1 without loops; unbounded with any while.
std::optional<std::uint64_t> iteration_count(const SeqProgram& p);
CompactnessRow compactness_report(const std::string& name, const SeqProgram& p, const StepTables& st);
// Table with columns program / n / k / naive / reduction; "---" marks
// unbounded values.
std::string format_compactness(const std::vector<CompactnessRow>& rows);

}  // namespace bell
