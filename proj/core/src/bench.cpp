#include "bell/bench.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "bell/errors.hpp"

namespace bell {
namespace {

std::optional<std::uint64_t> opt_u64(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return j.at(key).get<std::uint64_t>();
}

template <typename T>
std::string str(const std::optional<T>& v) {
    return v ? std::to_string(*v) : std::string("unbounded");
}

}  // namespace

SuiteManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open manifest " + path.string());
    }
    SuiteManifest m;
    m.dir = path.parent_path();
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.contains("bands")) {
            const auto& b = j.at("bands");
            m.bands.cfg_blocks = b.value("cfg_blocks", m.bands.cfg_blocks);
            m.bands.ssa_vars = b.value("ssa_vars", m.bands.ssa_vars);
            m.bands.asm_fraction = b.value("asm_fraction", m.bands.asm_fraction);
            m.bands.compile_ms = b.value("compile_ms", m.bands.compile_ms);
            m.bands.feedback_latency_ns_max = b.value("feedback_latency_ns_max", m.bands.feedback_latency_ns_max);
        }
        for (const auto& e : j.at("benchmarks")) {
            BenchmarkSpec s;
            s.name = e.at("name").get<std::string>();
            s.file = m.dir / e.at("file").get<std::string>();
            const auto& r = e.at("reference");
            s.reference.cfg_blocks = r.at("cfg_blocks").get<std::size_t>();
            s.reference.ssa_vars = r.at("ssa_vars").get<std::size_t>();
            s.reference.asm_instructions = r.at("asm_instructions").get<std::size_t>();
            s.reference.st_entries = r.at("st_entries").get<std::size_t>();
            s.reference.iterations = opt_u64(r, "iterations");
            s.reference.naive_configs = opt_u64(r, "naive_configs");
            s.reference.reduction = opt_u64(r, "reduction");
            s.feedback = e.value("feedback", false);
            if (e.contains("counts")) {
                s.counts = e.at("counts").get<std::vector<std::int32_t>>();
            }
            if (e.contains("latency_ns")) {
                const auto w = e.at("latency_ns").get<std::vector<double>>();
                if (w.size() != 2) {
                    throw SchemaError("latency_ns must be [lo, hi]");
                }
                s.latency_ns = std::make_pair(w[0], w[1]);
            }
            m.benchmarks.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("manifest " + path.string() + ": " + e.what());
    }
    return m;
}

BenchmarkRow run_benchmark(const BenchmarkSpec& spec, const Bands& bands, const CompileOptions& options) {
    BenchmarkRow row;
    row.name = spec.name;
    const CompileResult r = compile_file(spec.file, options);
    row.stats = r.stats;
    row.timings = r.timings;
    row.compile_ms = r.total_ms();
    row.compactness = compactness_report(spec.name, r.program, r.tables);

    auto& v = row.violations;
    const ReferenceMetrics& ref = spec.reference;
    auto band = [&](const char* metric, std::size_t observed, std::size_t expected, std::size_t tol) {
        const auto lo = expected > tol ? expected - tol : 0;
        if (observed < lo || observed > expected + tol) {
            v.push_back(std::string(metric) + ": expected " + std::to_string(expected) + " +/- " +
                        std::to_string(tol) + ", observed " + std::to_string(observed));
        }
    };
    band("cfg_blocks", r.stats.cfg_blocks, ref.cfg_blocks, bands.cfg_blocks);
    band("ssa_vars", r.stats.ssa_vars, ref.ssa_vars, bands.ssa_vars);
    const double asm_lo = ref.asm_instructions * (1 - bands.asm_fraction);
    const double asm_hi = ref.asm_instructions * (1 + bands.asm_fraction);
    if (r.stats.asm_instructions < asm_lo || r.stats.asm_instructions > asm_hi) {
        v.push_back("asm_instructions: expected within [" + std::to_string(asm_lo) + ", " + std::to_string(asm_hi) +
                    "], observed " + std::to_string(r.stats.asm_instructions));
    }
    auto exact = [&](const char* metric, auto observed, auto expected) {
        if (observed != expected) {
            v.push_back(std::string(metric) + ": expected exactly " + str(std::optional(expected)) + ", observed " +
                        str(std::optional(observed)));
        }
    };
    exact("st_entries", r.stats.st_entries, ref.st_entries);
    if (row.compactness.iterations != ref.iterations) {
        v.push_back("iterations: expected " + str(ref.iterations) + ", observed " + str(row.compactness.iterations));
    }
    if (row.compactness.naive_configs != ref.naive_configs) {
        v.push_back("naive_configs: expected " + str(ref.naive_configs) + ", observed " +
                    str(row.compactness.naive_configs));
    }
    if (row.compactness.reduction != ref.reduction) {
        v.push_back("reduction: expected " + str(ref.reduction) + ", observed " + str(row.compactness.reduction));
    }
    if (row.compile_ms >= bands.compile_ms) {
        v.push_back("compile_ms: expected < " + std::to_string(bands.compile_ms) + ", observed " +
                    std::to_string(row.compile_ms));
    }

    SimOptions so;
    so.record_exec = false;
    const SimTrace t = simulate(r.boards, r.table_map(), TimingModel{}, DetectionScript::cyclic(spec.counts), so);
    const LockstepReport ls = assert_lockstep(t);
    row.lockstep_ok = ls.ok;
    if (!ls.ok) {
        v.push_back("lockstep: " + ls.message);
    }
    row.protocol_violations = t.protocol_violations.size();
    if (row.protocol_violations != 0) {
        v.push_back("protocol: " + t.protocol_violations.front());
    }
    if (spec.feedback) {
        try {
            row.latency = measure_feedback_latency(t);
        } catch (const NoFeedbackCycleError& e) {
            v.push_back(std::string("latency: ") + e.what());
        }
        for (const auto& l : row.latency) {
            if (l.latency_ns >= bands.feedback_latency_ns_max) {
                v.push_back("latency: cycle " + std::to_string(l.id) + " took " + std::to_string(l.latency_ns) + " ns");
            }
            if (spec.latency_ns && (l.latency_ns < spec.latency_ns->first || l.latency_ns > spec.latency_ns->second)) {
                v.push_back("latency: cycle " + std::to_string(l.id) + " took " + std::to_string(l.latency_ns) +
                            " ns, outside the calibration window");
            }
        }
    }
    return row;
}

std::vector<BenchmarkRow> run_suite(const SuiteManifest& m, const CompileOptions& options) {
    std::vector<BenchmarkRow> rows;
    for (const auto& b : m.benchmarks) {
        rows.push_back(run_benchmark(b, m.bands, options));
    }
    return rows;
}

std::string format_metrics_table(const std::vector<BenchmarkRow>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(24) << "program" << std::right << std::setw(6) << "BBs" << std::setw(10) << "SSA vars"
       << std::setw(8) << "asm" << std::setw(6) << "ST" << std::setw(8) << "spills" << std::setw(12) << "compile ms"
       << std::setw(14) << "latency ns" << "  status\n";
    for (const auto& r : rows) {
        std::string latency = "-";
        if (!r.latency.empty()) {
            double hi = 0;
            for (const auto& l : r.latency) {
                hi = std::max(hi, l.latency_ns);
            }
            latency = std::to_string(static_cast<long long>(std::llround(hi)));
        }
        std::ostringstream ms;
        ms << std::fixed << std::setprecision(3) << r.compile_ms;
        os << std::left << std::setw(24) << r.name << std::right << std::setw(6) << r.stats.cfg_blocks << std::setw(10)
           << r.stats.ssa_vars << std::setw(8) << r.stats.asm_instructions << std::setw(6) << r.stats.st_entries
           << std::setw(8) << r.stats.spills << std::setw(12) << ms.str() << std::setw(14) << latency << "  "
           << (r.violations.empty() ? "ok" : "FAIL") << "\n";
        for (const auto& v : r.violations) {
            os << "    " << v << "\n";
        }
    }
    return os.str();
}

std::string suite_json(const std::vector<BenchmarkRow>& rows) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json e;
        e["name"] = r.name;
        e["cfg_blocks"] = r.stats.cfg_blocks;
        e["ssa_vars"] = r.stats.ssa_vars;
        e["asm_instructions"] = r.stats.asm_instructions;
        e["asm_per_board"] = r.stats.asm_per_board;
        e["st_entries"] = r.stats.st_entries;
        e["spills"] = r.stats.spills;
        e["max_pressure"] = r.stats.max_pressure;
        e["compile_ms"] = r.compile_ms;
        for (const auto& t : r.timings) {
            e["stage_ms"][t.stage] = t.ms;
        }
        const auto& c = r.compactness;
        e["iterations"] = c.iterations ? nlohmann::ordered_json(*c.iterations) : nlohmann::ordered_json();
        e["naive_configs"] = c.naive_configs ? nlohmann::ordered_json(*c.naive_configs) : nlohmann::ordered_json();
        e["reduction"] = c.reduction ? nlohmann::ordered_json(*c.reduction) : nlohmann::ordered_json();
        e["latency_ns"] = nlohmann::ordered_json::array();
        for (const auto& l : r.latency) {
            e["latency_ns"].push_back(l.latency_ns);
        }
        e["lockstep_ok"] = r.lockstep_ok;
        e["violations"] = r.violations;
        j.push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

}  // namespace bell
