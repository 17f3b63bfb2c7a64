#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "bell/bench.hpp"
#include "bell/errors.hpp"
#include "bell/pipeline.hpp"
#include "bell/sim.hpp"

namespace bell::cli {
namespace fs = std::filesystem;
namespace {

// Which stage (and therefore which exit code) an error kind belongs to.
const std::map<std::string, std::pair<std::string, int>>& error_table() {
    static const std::map<std::string, std::pair<std::string, int>> table{
        {"SchemaError", {"parse", kInputError}},
        {"ValidationError", {"validate", kInputError}},
        {"UnreachableBlockError", {"cfg", kInputError}},
        {"UseBeforeDefError", {"ssa", kInputError}},
        {"CriticalEdgeError", {"ssa", kInputError}},
        {"FrameOverflowError", {"regalloc", kInputError}},
        {"AllocationError", {"regalloc", kInputError}},
        {"UnsupportedNodeError", {"codegen", kInputError}},
        {"OffsetOverflowError", {"codegen", kInputError}},
        {"ImmediateOverflowError", {"codegen", kInputError}},
        {"DecodeError", {"codegen", kInputError}},
        {"DurationMismatchError", {"steptable", kInputError}},
        {"ScanTargetError", {"scan", kInputError}},
        {"DeadlockError", {"sim", kRuntimeError}},
        {"StepIndexError", {"sim", kRuntimeError}},
        {"MaxTicksExceeded", {"sim", kRuntimeError}},
        {"DetectionScriptExhausted", {"sim", kRuntimeError}},
        {"NoFeedbackCycleError", {"sim", kRuntimeError}},
        {"MemoryFaultError", {"sim", kRuntimeError}},
        {"BandViolation", {"bench", kRuntimeError}},
    };
    return table;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw SchemaError("cannot open " + p.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("cannot write " + p.string());
    }
}

void write_text(const fs::path& p, const std::string& text) { write_bytes(p, {text.begin(), text.end()}); }

std::vector<std::int32_t> parse_counts(const std::string& text) {
    std::vector<std::int32_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            continue;
        }
        try {
            std::size_t used = 0;
            const long v = std::stol(item, &used);
            if (used != item.size() || v < 0 || v > INT32_MAX) {
                throw std::invalid_argument(item);
            }
            out.push_back(static_cast<std::int32_t>(v));
        } catch (const std::logic_error&) {
            throw SchemaError("bad count '" + item + "' in --counts");
        }
    }
    return out;
}

std::string fmt_ns(double ns) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(0) << ns;
    return os.str();
}

// A program path, or a compile output directory whose manifest names the
// source; the bundle must still match what the source compiles to.
fs::path resolve_source(const fs::path& input, std::optional<std::string>& expected_hash) {
    if (!fs::is_directory(input)) {
        return input;
    }
    const auto m = nlohmann::json::parse(read_text(input / "manifest.json"), nullptr, false);
    if (m.is_discarded() || !m.contains("source") || !m.contains("control_hash")) {
        throw SchemaError(input.string() + "/manifest.json is not a compile manifest");
    }
    expected_hash = m.at("control_hash").get<std::string>();
    return m.at("source").get<std::string>();
}

struct CompileFlags {
    int regs = 8;
    int frame_slots = kDefaultFrameSlots;

    CompileOptions options() const {
        CompileOptions o;
        o.regs.total = regs;
        o.frame_slots = frame_slots;
        return o;
    }
};

void add_compile_flags(CLI::App* cmd, CompileFlags& f) {
    cmd->add_option("--regs", f.regs, "Register file size (x0 zero, top register scratch)")->capture_default_str();
    cmd->add_option("--frame-slots", f.frame_slots, "Spill frame size in words")->capture_default_str();
}

int cmd_compile(const fs::path& input, const fs::path& out_dir, const std::string& emit_text, const CompileFlags& f,
                std::ostream& out) {
    const std::set<std::string> emit = parse_emit_list(emit_text);
    const CompileResult r = compile_file(input, f.options());
    const auto artifacts = render_artifacts(r, emit);
    fs::create_directories(out_dir);
    for (const auto& a : artifacts) {
        write_bytes(out_dir / a.file, a.bytes);
    }
    write_text(out_dir / "manifest.json", manifest_json(r, fs::absolute(input).lexically_normal().string(), artifacts));
    out << "compiled " << input.string() << ": " << r.stats.cfg_blocks << " blocks, " << r.stats.ssa_vars
        << " ssa vars, " << r.stats.asm_instructions << " asm, " << r.stats.st_entries << " step entries, "
        << r.stats.spills << " spills, " << std::fixed << std::setprecision(3) << r.total_ms() << " ms\n";
    for (const auto& w : r.warnings) {
        out << "warning: " << w.code << ": " << w.message << "\n";
    }
    out << "wrote " << artifacts.size() + 1 << " files to " << out_dir.string() << "\n";
    return kOk;
}

struct SimFlags {
    std::string timing_path;
    std::string counts;
    bool cycle = false;
    std::optional<std::uint64_t> seed;
    double poisson_mean = 4.0;
    std::int64_t max_ticks = SimOptions{}.max_ticks;
    std::string trace_path;
    std::string summary_path;
    std::optional<double> assert_latency_ns;
    CompileFlags compile;
};

DetectionScript make_script(const SimFlags& f) {
    if (!f.counts.empty()) {
        auto counts = parse_counts(f.counts);
        return f.cycle ? DetectionScript::cyclic(std::move(counts)) : DetectionScript::scripted(std::move(counts));
    }
    return DetectionScript::poisson(f.seed.value_or(1), f.poisson_mean);
}

// Simulates one table set; returns false when an assertion fails.
bool run_one(const std::string& label, const std::map<std::string, BoardProgram>& boards,
             const std::map<std::string, StepTable>& tables, const TimingModel& tm, const SimFlags& f,
             const fs::path& trace_path, const fs::path& summary_path, std::ostream& out) {
    SimOptions so;
    so.max_ticks = f.max_ticks;
    so.frame_slots = static_cast<std::size_t>(f.compile.frame_slots);
    const SimTrace t = simulate(boards, tables, tm, make_script(f), so);
    std::vector<LatencyRecord> latency;
    if (!t.cycles.empty()) {
        latency = measure_feedback_latency(t);
    }
    const LockstepReport ls = assert_lockstep(t);
    bool ok = ls.ok && t.protocol_violations.empty();

    const std::string prefix = label.empty() ? "" : "[" + label + "] ";
    out << prefix << "end tick " << t.end_tick << " (" << t.end_tick * t.tick_ns << " ns), " << t.cycles.size()
        << " feedback cycles\n";
    for (const auto& l : latency) {
        out << prefix << "cycle " << l.id << ": detect " << l.detect_close << " -> step " << l.step_start << " = "
            << l.ticks << " ticks = " << fmt_ns(l.latency_ns) << " ns\n";
    }
    if (!latency.empty()) {
        const double hi =
            std::max_element(latency.begin(), latency.end(), [](const auto& a, const auto& b) {
                return a.latency_ns < b.latency_ns;
            })->latency_ns;
        out << prefix << "max latency " << fmt_ns(hi) << " ns";
        if (f.assert_latency_ns) {
            const bool pass = hi < *f.assert_latency_ns;
            ok = ok && pass;
            out << ", " << (pass ? "PASS" : "FAIL") << " (limit " << fmt_ns(*f.assert_latency_ns) << " ns)";
        }
        out << "\n";
    } else if (f.assert_latency_ns) {
        out << prefix << "no feedback cycles to measure, FAIL\n";
        ok = false;
    }
    out << prefix << "lockstep: " << (ls.ok ? "PASS" : "FAIL " + ls.message) << "\n";
    out << prefix << "protocol: "
        << (t.protocol_violations.empty() ? "PASS" : "FAIL " + t.protocol_violations.front()) << "\n";
    if (!trace_path.empty()) {
        write_text(trace_path, trace_jsonl(t));
    }
    if (!summary_path.empty()) {
        write_text(summary_path, trace_summary_json(t, latency));
    }
    return ok;
}

fs::path with_suffix(const std::string& path, const std::string& tag) {
    if (path.empty()) {
        return {};
    }
    fs::path p(path);
    return p.parent_path() / (p.stem().string() + "." + tag + p.extension().string());
}

int cmd_sim(const fs::path& input, const SimFlags& f, std::ostream& out) {
    TimingModel tm;
    if (!f.timing_path.empty()) {
        tm = parse_timing_model(read_text(f.timing_path));
    }
    tm.validate();
    std::optional<std::string> expected_hash;
    const fs::path source = resolve_source(input, expected_hash);
    const SeqProgram program = load_program(source);

    if (program.scan) {
        const ScanResult s = expand_scan(program, f.compile.options());
        if (expected_hash && *expected_hash != hex64(control_hash(s.base.boards))) {
            throw ValidationError("bundle " + input.string() + " is stale: recompile it");
        }
        out << "scan over " << program.scan->state << "." << program.scan->field << ": " << s.points.size()
            << " points, control hash " << hex64(control_hash(s.base.boards)) << " at every point\n";
        bool ok = true;
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            const auto& p = s.points[i];
            const std::map<std::string, StepTable> tables(p.tables.boards.begin(), p.tables.boards.end());
            const std::string tag = "point" + std::to_string(i);
            ok = run_one(tag + " " + p.value, s.base.boards, tables, tm, f, with_suffix(f.trace_path, tag),
                         with_suffix(f.summary_path, tag), out) &&
                 ok;
        }
        return ok ? kOk : kRuntimeError;
    }

    const CompileResult r = compile(program, f.compile.options());
    if (expected_hash && *expected_hash != hex64(control_hash(r.boards))) {
        throw ValidationError("bundle " + input.string() + " is stale: recompile it");
    }
    return run_one("", r.boards, r.table_map(), tm, f, f.trace_path, f.summary_path, out) ? kOk : kRuntimeError;
}

int cmd_bench(const fs::path& manifest, const std::string& json_path, const CompileFlags& f, std::ostream& out,
              std::ostream& err) {
    const SuiteManifest m = load_manifest(manifest);
    const auto rows = run_suite(m, f.options());
    out << format_metrics_table(rows) << "\n";
    std::vector<CompactnessRow> compact;
    for (const auto& r : rows) {
        compact.push_back(r.compactness);
    }
    out << format_compactness(compact);
    if (!json_path.empty()) {
        write_text(json_path, suite_json(rows));
    }
    std::size_t failures = 0;
    for (const auto& r : rows) {
        for (const auto& v : r.violations) {
            err << "BandViolation: " << r.name << ": " << v << "\n";
            ++failures;
        }
    }
    return failures == 0 ? kOk : kRuntimeError;
}

int cmd_compactness(const std::vector<std::string>& inputs, const std::string& json_path, const CompileFlags& f,
                    std::ostream& out) {
    std::vector<std::pair<std::string, fs::path>> programs;
    for (const auto& in : inputs) {
        const auto j = nlohmann::json::parse(read_text(in), nullptr, false);
        if (!j.is_discarded() && j.is_object() && j.contains("benchmarks")) {
            for (const auto& b : load_manifest(in).benchmarks) {
                programs.emplace_back(b.name, b.file);
            }
        } else {
            programs.emplace_back(fs::path(in).stem().string(), in);
        }
    }
    std::vector<CompactnessRow> rows;
    for (const auto& [name, path] : programs) {
        const CompileResult r = compile_file(path, f.options());
        rows.push_back(compactness_report(name, r.program, r.tables));
    }
    out << format_compactness(rows);
    if (!json_path.empty()) {
        nlohmann::ordered_json j = nlohmann::ordered_json::array();
        for (const auto& r : rows) {
            auto opt = [](const std::optional<std::uint64_t>& v) {
                return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
            };
            j.push_back({{"name", r.name},
                         {"iterations", opt(r.iterations)},
                         {"entries", r.entries},
                         {"naive_configs", opt(r.naive_configs)},
                         {"reduction", opt(r.reduction)}});
        }
        write_text(json_path, j.dump(2) + "\n");
    }
    return kOk;
}

int cmd_scan(const fs::path& input, const fs::path& out_dir, const CompileFlags& f, std::ostream& out) {
    const SeqProgram program = load_program(input);
    const ScanResult s = expand_scan(program, f.options());
    fs::create_directories(out_dir);
    nlohmann::ordered_json j;
    j["source"] = fs::absolute(input).lexically_normal().string();
    j["state"] = program.scan->state;
    j["field"] = program.scan->field;
    j["control_hash"] = hex64(control_hash(s.base.boards));
    for (const auto& [id, bp] : s.base.boards) {
        const auto bytes = words_to_bytes(bp.words);
        write_bytes(out_dir / (id + ".bin"), bytes);
        j["control"][id] = hex64(fnv1a64(bytes));
    }
    j["points"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        const auto& p = s.points[i];
        std::ostringstream dir;
        dir << "point" << std::setw(3) << std::setfill('0') << i;
        nlohmann::ordered_json pj{{"value", p.value}, {"dir", dir.str()}, {"control_hash", hex64(p.control_hash)}};
        for (const auto& [id, t] : p.tables.boards) {
            const auto bytes = steptable_binary(t);
            write_bytes(out_dir / dir.str() / (id + ".steptable.bin"), bytes);
            write_text(out_dir / dir.str() / (id + ".steptable.json"),
                       steptable_json(t, p.tables.fixed_point, &program));
            pj["tables"][id] = hex64(fnv1a64(bytes));
        }
        j["points"].push_back(std::move(pj));
    }
    write_text(out_dir / "scan.json", j.dump(2) + "\n");
    out << "expanded " << s.points.size() << " points of " << program.scan->state << "." << program.scan->field
        << " into " << out_dir.string() << ", control hash " << hex64(control_hash(s.base.boards)) << "\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Compiler and multi-board simulator for pulse-sequence control programs", "bell"};
    app.require_subcommand(1);

    std::string input;
    std::string out_dir = "out";
    std::string emit = "all";
    std::string json_path;
    CompileFlags cf;
    SimFlags sf;
    std::vector<std::string> inputs;
    std::string manifest = "programs/manifest.json";

    auto* compile_cmd = app.add_subcommand("compile", "Compile a program and write stage artifacts");
    compile_cmd->add_option("input", input, "Program JSON")->required();
    compile_cmd->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
    compile_cmd->add_option("--emit", emit, "Comma list of tree,cfg,ssa,liveness,igraph,alloc,asm,bin,steptable or all")
        ->capture_default_str();
    add_compile_flags(compile_cmd, cf);

    auto* bench_cmd = app.add_subcommand("bench", "Run the benchmark suite and check reference bands");
    bench_cmd->add_option("manifest", manifest, "Suite manifest")->capture_default_str();
    bench_cmd->add_option("--json", json_path, "Also write the report as JSON");
    add_compile_flags(bench_cmd, cf);

    auto* sim_cmd = app.add_subcommand("sim", "Simulation");
    sim_cmd->require_subcommand(1);
    auto* sim_run = sim_cmd->add_subcommand("run", "Compile and simulate a program or compiled bundle");
    sim_run->add_option("input", input, "Program JSON or compile output directory")->required();
    sim_run->add_option("--timing", sf.timing_path, "Timing model JSON");
    sim_run->add_option("--counts", sf.counts, "Comma list of photon counts, one per counter read");
    sim_run->add_flag("--cycle", sf.cycle, "Repeat --counts instead of failing when it runs out");
    sim_run->add_option("--seed", sf.seed, "Seed for Poisson counts (used when --counts is absent)");
    sim_run->add_option("--poisson-mean", sf.poisson_mean, "Mean of Poisson counts")->capture_default_str();
    sim_run->add_option("--max-ticks", sf.max_ticks, "Abort after this many ticks")->capture_default_str();
    sim_run->add_option("--trace", sf.trace_path, "Write JSONL trace");
    sim_run->add_option("--summary", sf.summary_path, "Write JSON summary");
    sim_run->add_option("--assert-latency-ns", sf.assert_latency_ns, "Fail unless every feedback latency is below");
    add_compile_flags(sim_run, sf.compile);

    auto* report_cmd = app.add_subcommand("report", "Reports");
    report_cmd->require_subcommand(1);
    auto* compact_cmd = report_cmd->add_subcommand("compactness", "Step-table compactness table");
    compact_cmd->add_option("inputs", inputs, "Program JSON files or a suite manifest")->required();
    compact_cmd->add_option("--json", json_path, "Also write the table as JSON");
    add_compile_flags(compact_cmd, cf);

    auto* scan_cmd = app.add_subcommand("scan", "Parameter scans");
    scan_cmd->require_subcommand(1);
    auto* expand_cmd = scan_cmd->add_subcommand("expand", "Write per-point step tables for a scan program");
    expand_cmd->add_option("input", input, "Program JSON with a scan")->required();
    expand_cmd->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
    add_compile_flags(expand_cmd, cf);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kInputError;
    }

    try {
        if (compile_cmd->parsed()) {
            return cmd_compile(input, out_dir, emit, cf, out);
        }
        if (bench_cmd->parsed()) {
            return cmd_bench(manifest, json_path, cf, out, err);
        }
        if (sim_run->parsed()) {
            return cmd_sim(input, sf, out);
        }
        if (compact_cmd->parsed()) {
            return cmd_compactness(inputs, json_path, cf, out);
        }
        if (expand_cmd->parsed()) {
            return cmd_scan(input, out_dir, cf, out);
        }
    } catch (const Error& e) {
        const auto& table = error_table();
        const auto it = table.find(e.kind());
        if (it == table.end()) {
            err << "error: " << e.what() << "\n";
            return kInternal;
        }
        err << "error [" << it->second.first << "]: " << e.what() << "\n";
        return it->second.second;
    } catch (const nlohmann::json::exception& e) {
        err << "error [parse]: SchemaError: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    err << "internal error: no subcommand ran\n";
    return kInternal;
}

}  // namespace bell::cli
