#include "bell/pipeline.hpp"

#include <chrono>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "bell/errors.hpp"

namespace bell {
namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
auto timed(std::vector<StageTiming>& timings, const char* stage, F&& f) {
    const auto t0 = Clock::now();
    auto result = f();
    timings.push_back({stage, std::chrono::duration<double, std::milli>(Clock::now() - t0).count()});
    return result;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

double CompileResult::total_ms() const {
    double t = 0;
    for (const auto& s : timings) {
        t += s.ms;
    }
    return t;
}

CompileResult compile(const SeqProgram& program, const CompileOptions& options) {
    CompileResult r;
    r.program = program;
    r.regs = options.regs;
    auto diags = timed(r.timings, "validate", [&] { return validate_variables(program); });
    if (!diags.empty()) {
        std::string msg;
        for (const auto& d : diags) {
            msg += (msg.empty() ? "" : "; ") + d.code + ": " + d.message;
        }
        throw ValidationError(msg);
    }
    r.cfg = timed(r.timings, "cfg", [&] { return build_cfg(program, &r.warnings); });
    r.ssa = timed(r.timings, "ssa", [&] { return to_ssa(r.cfg, compute_dominators(r.cfg)); });
    r.alloc = timed(r.timings, "regalloc", [&] {
        r.lowered = out_of_ssa(r.ssa, {options.split_critical_edges});
        r.liveness = compute_liveness(r.lowered);
        return allocate_registers(r.lowered, options.regs, options.frame_slots);
    });
    r.tables = timed(r.timings, "steptable", [&] {
        return compile_steptables(program, {options.fixed_point, options.isolate_state});
    });
    r.boards = timed(r.timings, "codegen",
                     [&] { return lower_to_asm(r.alloc.cfg, r.alloc.allocation, program, r.tables, options.regs); });

    CompileStats& s = r.stats;
    s.cfg_blocks = r.cfg.blocks.size();
    s.ssa_vars = r.ssa.var_count;
    s.ssa_versions = r.ssa.version_count;
    s.phis = r.ssa.phi_count;
    for (const auto& [id, bp] : r.boards) {
        s.asm_per_board[id] = bp.size();
        if (bp.broadcaster) {
            s.asm_instructions = bp.size();
        }
    }
    if (s.asm_instructions == 0) {
        for (const auto& [_, n] : s.asm_per_board) {
            s.asm_instructions = std::max(s.asm_instructions, n);
        }
    }
    s.st_entries = r.tables.entry_count();
    s.spills = r.alloc.allocation.spill_count;
    s.max_pressure = r.alloc.allocation.max_pressure;
    s.alloc_rounds = r.alloc.allocation.rounds;
    return r;
}

CompileResult compile_file(const std::filesystem::path& path, const CompileOptions& options) {
    std::vector<StageTiming> parse;
    SeqProgram p = timed(parse, "parse", [&] { return load_program(path); });
    CompileResult r = compile(p, options);
    r.timings.insert(r.timings.begin(), parse.front());
    return r;
}

std::set<std::string> parse_emit_list(const std::string& text) {
    std::set<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        if (item == "all") {
            for (const auto& k : kEmitKinds) {
                if (k != "liveness") {
                    out.insert(k);
                }
            }
        } else if (std::find(kEmitKinds.begin(), kEmitKinds.end(), item) != kEmitKinds.end()) {
            out.insert(item);
        } else {
            throw ValidationError("unknown --emit kind '" + item + "'");
        }
    }
    return out;
}

std::vector<Artifact> render_artifacts(const CompileResult& r, const std::set<std::string>& emit) {
    std::vector<Artifact> out;
    auto add = [&](std::string file, std::string stage, std::vector<std::uint8_t> bytes) {
        out.push_back({std::move(file), std::move(stage), std::move(bytes)});
    };
    if (emit.contains("tree")) {
        add("program.tree.json", "tree", bytes_of(serialize_program(r.program)));
    }
    if (emit.contains("cfg")) {
        add("program.cfg.txt", "cfg", bytes_of(dump_cfg(r.cfg, &r.program)));
    }
    if (emit.contains("ssa")) {
        add("program.ssa.txt", "ssa", bytes_of(dump_ssa(r.ssa, &r.program)));
    }
    if (emit.contains("liveness")) {
        add("program.liveness.txt", "liveness", bytes_of(dump_liveness(r.lowered, r.liveness)));
    }
    if (emit.contains("igraph")) {
        add("program.igraph.txt", "igraph", bytes_of(dump_interference(r.alloc.graph)));
    }
    if (emit.contains("alloc")) {
        add("program.alloc.txt", "alloc",
            bytes_of(dump_allocation(r.alloc.allocation, r.regs) + dump_cfg(r.alloc.cfg, &r.program)));
    }
    if (emit.contains("asm")) {
        std::string text;
        for (const auto& [_, bp] : r.boards) {
            text += format_asm(bp) + "\n";
        }
        add("program.asm", "asm", bytes_of(text));
    }
    for (const auto& [id, bp] : r.boards) {
        if (emit.contains("bin")) {
            add(id + ".bin", "bin", words_to_bytes(bp.words));
        }
    }
    for (const auto& [id, t] : r.tables.boards) {
        if (emit.contains("steptable")) {
            add(id + ".steptable.bin", "steptable", steptable_binary(t));
            add(id + ".steptable.json", "steptable", bytes_of(steptable_json(t, r.tables.fixed_point, &r.program)));
        }
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h = (h ^ c) * 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes) {
    return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::uint64_t control_hash(const std::map<std::string, BoardProgram>& boards) {
    std::vector<std::uint8_t> all;
    for (const auto& [id, bp] : boards) {
        all.insert(all.end(), id.begin(), id.end());
        all.push_back(0);
        const auto b = words_to_bytes(bp.words);
        all.insert(all.end(), b.begin(), b.end());
    }
    return fnv1a64(all);
}

std::string manifest_json(const CompileResult& r, const std::string& source, const std::vector<Artifact>& artifacts) {
    nlohmann::ordered_json j;
    j["source"] = source;
    j["stage_ms"] = nlohmann::ordered_json::object();
    for (const auto& t : r.timings) {
        j["stage_ms"][t.stage] = t.ms;
    }
    j["total_ms"] = r.total_ms();
    const CompileStats& s = r.stats;
    j["stats"] = {{"cfg_blocks", s.cfg_blocks},     {"ssa_vars", s.ssa_vars},
                  {"ssa_versions", s.ssa_versions}, {"phis", s.phis},
                  {"asm_instructions", s.asm_instructions}, {"asm_per_board", s.asm_per_board},
                  {"st_entries", s.st_entries},     {"spills", s.spills},
                  {"max_pressure", s.max_pressure}, {"alloc_rounds", s.alloc_rounds}};
    j["control_hash"] = hex64(control_hash(r.boards));
    j["artifacts"] = nlohmann::ordered_json::array();
    for (const auto& a : artifacts) {
        j["artifacts"].push_back(
            {{"file", a.file}, {"stage", a.stage}, {"bytes", a.bytes.size()}, {"fnv1a64", hex64(fnv1a64(a.bytes))}});
    }
    j["warnings"] = nlohmann::ordered_json::array();
    for (const auto& w : r.warnings) {
        j["warnings"].push_back(w.code + ": " + w.message);
    }
    return j.dump(2) + "\n";
}

ScanResult expand_scan(const SeqProgram& program, const CompileOptions& options) {
    if (!program.scan) {
        throw ScanTargetError("program has no scan");
    }
    const ScanSpec& scan = *program.scan;
    if (scan.points.empty()) {
        throw ScanTargetError("scan has no points");
    }
    CompileOptions opts = options;
    opts.isolate_state = scan.state;
    ScanResult out;
    out.base = compile(apply_scan_point(program, scan, scan.points.front()), opts);
    const std::uint64_t base_hash = control_hash(out.base.boards);
    for (const auto& point : scan.points) {
        CompileResult r = compile(apply_scan_point(program, scan, point), opts);
        ScanPoint sp;
        sp.value = point;
        sp.control_hash = control_hash(r.boards);
        if (sp.control_hash != base_hash) {
            throw ValidationError("control program changed at scan point " + point);
        }
        sp.tables = std::move(r.tables);
        out.points.push_back(std::move(sp));
    }
    return out;
}

}  // namespace bell
