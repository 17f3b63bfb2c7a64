#include "bell/steptable.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "bell/errors.hpp"

namespace bell {
namespace {

constexpr char kMagic[4] = {'B', 'S', 'T', 'B'};
constexpr std::uint16_t kBinaryVersion = 1;

long double parse_decimal(const std::string& s) { return std::stold(s); }

std::uint32_t mask_bits(int bits) { return bits >= 32 ? 0xFFFFFFFFu : (1u << bits) - 1; }

// Plays in first-occurrence order.
void collect_plays(const NodeList& body, std::vector<std::string>& out) {
    for (const auto& n : body) {
        if (const auto* p = std::get_if<Play>(&n.node)) {
            out.push_back(p->state);
        } else if (const auto* l = std::get_if<Loop>(&n.node)) {
            collect_plays(l->body, out);
        } else if (const auto* w = std::get_if<While>(&n.node)) {
            collect_plays(w->body, out);
        } else if (const auto* i = std::get_if<If>(&n.node)) {
            collect_plays(i->then_body, out);
            if (i->else_body) {
                collect_plays(*i->else_body, out);
            }
        }
    }
}

StepEntry project(const StateDecl& s, const BoardDecl& board, const FixedPoint& fp) {
    StepEntry e;
    e.duration_ticks = s.duration_ticks;
    if (board.kind == BoardKind::DDS) {
        for (const auto& [ch, setting] : s.dds) {
            if (ch.board == board.id) {
                e.dds[ch.channel] = to_dds_word(setting, fp);
            }
        }
    } else {
        if (auto it = s.ttl_out.find(board.id); it != s.ttl_out.end()) {
            e.out_mask = it->second;
        }
        if (auto it = s.ttl_in.find(board.id); it != s.ttl_in.end()) {
            e.in_mask = it->second;
        }
    }
    return e;
}

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    put16(b, static_cast<std::uint16_t>(v));
    put16(b, static_cast<std::uint16_t>(v >> 16));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
    std::uint8_t u8() {
        need(1);
        return b_[pos_++];
    }
    std::uint16_t u16() {
        const std::uint16_t lo = u8();
        return static_cast<std::uint16_t>(lo | (u8() << 8));
    }
    std::uint32_t u32() {
        const std::uint32_t lo = u16();
        return lo | (static_cast<std::uint32_t>(u16()) << 16);
    }
    bool done() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > b_.size()) {
            throw DecodeError("step table image truncated at byte " + std::to_string(pos_));
        }
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

}  // namespace

DdsWord to_dds_word(const DdsSetting& s, const FixedPoint& fp) {
    const long double f = parse_decimal(s.freq_hz);
    const long double a = parse_decimal(s.amp_frac);
    const long double p = parse_decimal(s.phase_rad);
    if (f < 0 || f >= fp.dds_clock_hz) {
        throw ValidationError("frequency " + s.freq_hz + " Hz outside [0, DDS clock)");
    }
    DdsWord w;
    const long double freq_scale = std::ldexp(1.0L, fp.freq_bits);
    w.freq_word = static_cast<std::uint32_t>(
        std::min<long double>(std::llround(f / fp.dds_clock_hz * freq_scale), mask_bits(fp.freq_bits)));
    w.amp_word = static_cast<std::uint32_t>(std::llround(a * mask_bits(fp.amp_bits)));
    const long double turns = p / (2 * std::numbers::pi_v<long double>);
    const long long phase = std::llround(turns * std::ldexp(1.0L, fp.phase_bits));
    const long long modulus = 1LL << fp.phase_bits;
    w.phase_word = static_cast<std::uint32_t>(((phase % modulus) + modulus) % modulus);
    return w;
}

std::size_t StepTables::entry_count() const { return boards.empty() ? 0 : boards.begin()->second.entries.size(); }

StepTables compile_steptables(const SeqProgram& p, const StepTableOptions& options) {
    StepTables out;
    out.fixed_point = options.fixed_point;
    out.state_entry.assign(p.states.size(), std::nullopt);
    for (const auto& b : p.config.boards) {
        StepTable& t = out.boards[b.id];
        t.board_id = b.id;
        t.kind = b.kind;
        t.channel_count = b.channel_count;
    }

    std::vector<std::string> plays;
    collect_plays(p.body, plays);
    // System-wide projection of each entry, for dedup.
    std::vector<std::vector<StepEntry>> keys;
    std::optional<std::uint32_t> isolated_entry;
    for (const auto& name : plays) {
        const auto idx = p.state_index(name);
        if (!idx) {
            throw ValidationError("unknown state '" + name + "'");
        }
        if (out.state_entry[*idx]) {
            continue;
        }
        const StateDecl& s = p.states[*idx];
        std::vector<StepEntry> key;
        for (const auto& b : p.config.boards) {
            key.push_back(project(s, b, options.fixed_point));
            if (key.back().duration_ticks != key.front().duration_ticks) {
                throw DurationMismatchError("state '" + name + "' projects to different durations");
            }
        }
        const bool isolated = options.isolate_state && *options.isolate_state == name;
        std::optional<std::uint32_t> entry;
        for (std::uint32_t k = 0; k < keys.size() && !isolated; ++k) {
            if (keys[k] == key && isolated_entry != k) {
                entry = k;
                break;
            }
        }
        if (!entry) {
            entry = static_cast<std::uint32_t>(keys.size());
            keys.push_back(key);
            for (std::size_t bi = 0; bi < p.config.boards.size(); ++bi) {
                out.boards[p.config.boards[bi].id].entries.push_back(key[bi]);
            }
            if (isolated) {
                isolated_entry = entry;
            }
        }
        out.state_entry[*idx] = entry;
        for (auto& [_, t] : out.boards) {
            t.index[name] = *entry;
        }
    }
    return out;
}

std::vector<std::uint8_t> steptable_binary(const StepTable& t) {
    std::vector<std::uint8_t> b(std::begin(kMagic), std::end(kMagic));
    put16(b, kBinaryVersion);
    put16(b, t.kind == BoardKind::DDS ? 0 : 1);
    put16(b, static_cast<std::uint16_t>(t.channel_count));
    put16(b, 0);
    put32(b, static_cast<std::uint32_t>(t.entries.size()));
    for (const auto& e : t.entries) {
        put32(b, static_cast<std::uint32_t>(e.duration_ticks));
        if (t.kind == BoardKind::DDS) {
            for (int ch = 0; ch < t.channel_count; ++ch) {
                auto it = e.dds.find(ch);
                const bool present = it != e.dds.end();
                const DdsWord w = present ? it->second : DdsWord{};
                put16(b, present ? 1 : 0);
                put16(b, static_cast<std::uint16_t>(w.amp_word));
                put32(b, w.freq_word);
                put16(b, static_cast<std::uint16_t>(w.phase_word));
                put16(b, 0);
            }
        } else {
            put32(b, e.out_mask);
            put32(b, e.in_mask);
        }
    }
    return b;
}

StepTable read_steptable_binary(const std::vector<std::uint8_t>& bytes, const std::string& board_id) {
    Reader r(bytes);
    for (char c : kMagic) {
        if (r.u8() != static_cast<std::uint8_t>(c)) {
            throw DecodeError("bad step table magic");
        }
    }
    if (r.u16() != kBinaryVersion) {
        throw DecodeError("unsupported step table version");
    }
    StepTable t;
    t.board_id = board_id;
    const std::uint16_t kind = r.u16();
    if (kind > 1) {
        throw DecodeError("bad board kind in step table");
    }
    t.kind = kind == 0 ? BoardKind::DDS : BoardKind::TTL;
    t.channel_count = r.u16();
    r.u16();
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        StepEntry e;
        e.duration_ticks = r.u32();
        if (t.kind == BoardKind::DDS) {
            for (int ch = 0; ch < t.channel_count; ++ch) {
                const bool present = r.u16() != 0;
                DdsWord w;
                w.amp_word = r.u16();
                w.freq_word = r.u32();
                w.phase_word = r.u16();
                r.u16();
                if (present) {
                    e.dds[ch] = w;
                }
            }
        } else {
            e.out_mask = r.u32();
            e.in_mask = r.u32();
        }
        t.entries.push_back(std::move(e));
    }
    if (!r.done()) {
        throw DecodeError("trailing bytes after step table");
    }
    return t;
}

std::string steptable_json(const StepTable& t, const FixedPoint& fp, const SeqProgram* program) {
    (void)program;
    nlohmann::ordered_json j;
    j["board"] = t.board_id;
    j["kind"] = std::string(to_string(t.kind));
    j["version"] = kBinaryVersion;
    j["fixed_point"] = {{"dds_clock_hz", fp.dds_clock_hz},
                        {"freq_bits", fp.freq_bits},
                        {"amp_bits", fp.amp_bits},
                        {"phase_bits", fp.phase_bits}};
    std::vector<std::vector<std::string>> names(t.entries.size());
    for (const auto& [name, idx] : t.index) {
        names[idx].push_back(name);
    }
    j["entries"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
        const StepEntry& e = t.entries[i];
        nlohmann::ordered_json row;
        row["index"] = i;
        row["states"] = names[i];
        row["duration_ticks"] = e.duration_ticks;
        if (t.kind == BoardKind::DDS) {
            row["dds"] = nlohmann::ordered_json::array();
            for (const auto& [ch, w] : e.dds) {
                row["dds"].push_back(
                    {{"channel", ch}, {"freq_word", w.freq_word}, {"amp_word", w.amp_word}, {"phase_word", w.phase_word}});
            }
        } else {
            row["out_mask"] = e.out_mask;
            row["in_mask"] = e.in_mask;
        }
        j["entries"].push_back(std::move(row));
    }
    return j.dump(2) + "\n";
}

namespace {

// nullopt: unbounded.
std::optional<std::uint64_t> iterations(const NodeList& body) {
    std::uint64_t total = 0;
    for (const auto& n : body) {
        if (std::holds_alternative<While>(n.node)) {
            return std::nullopt;
        }
        if (const auto* l = std::get_if<Loop>(&n.node)) {
            auto inner = iterations(l->body);
            if (!inner) {
                return std::nullopt;
            }
            total += static_cast<std::uint64_t>(l->count) * std::max<std::uint64_t>(*inner, 1);
        } else if (const auto* i = std::get_if<If>(&n.node)) {
            auto t = iterations(i->then_body);
            auto e = i->else_body ? iterations(*i->else_body) : std::optional<std::uint64_t>(0);
            if (!t || !e) {
                return std::nullopt;
            }
            total += *t + *e;
        }
    }
    return total;
}

}  // namespace

std::optional<std::uint64_t> iteration_count(const SeqProgram& p) {
    auto n = iterations(p.body);
    if (n && *n == 0) {
        return 1;
    }
    return n;
}

CompactnessRow compactness_report(const std::string& name, const SeqProgram& p, const StepTables& st) {
    CompactnessRow row;
    row.name = name;
    row.entries = st.entry_count();
    row.iterations = iteration_count(p);
    if (row.iterations) {
        row.naive_configs = *row.iterations * row.entries;
        row.reduction = row.entries == 0 ? 0 : *row.naive_configs / row.entries;
    }
    return row;
}

std::string format_compactness(const std::vector<CompactnessRow>& rows) {
    std::ostringstream os;
    auto opt = [](const std::optional<std::uint64_t>& v, const char* suffix = "") {
        return v ? std::to_string(*v) + suffix : std::string("---");
    };
    os << std::left << std::setw(26) << "program" << std::right << std::setw(8) << "n" << std::setw(8) << "k"
       << std::setw(10) << "naive" << std::setw(12) << "reduction" << "\n";
    for (const auto& r : rows) {
        os << std::left << std::setw(26) << r.name << std::right << std::setw(8) << opt(r.iterations) << std::setw(8)
           << r.entries << std::setw(10) << opt(r.naive_configs) << std::setw(12) << opt(r.reduction, "x") << "\n";
    }
    return os.str();
}

}  // namespace bell
