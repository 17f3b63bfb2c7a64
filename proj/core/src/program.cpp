#include "bell/program.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bell/errors.hpp"

namespace bell {

using nlohmann::json;

std::string_view to_string(BoardKind kind) { return kind == BoardKind::DDS ? "DDS" : "TTL"; }

std::string SourceLoc::str() const {
    if (file.empty() && line == 0) {
        return "<unknown>";
    }
    return file + ":" + std::to_string(line);
}

const BoardDecl* SystemConfig::find(std::string_view id) const {
    for (const auto& b : boards) {
        if (b.id == id) {
            return &b;
        }
    }
    return nullptr;
}

const BoardDecl* SystemConfig::counter_board() const {
    const BoardDecl* only_ttl = nullptr;
    int ttl_count = 0;
    for (const auto& b : boards) {
        if (b.kind == BoardKind::TTL && b.counters) {
            return &b;
        }
        if (b.kind == BoardKind::TTL) {
            only_ttl = &b;
            ++ttl_count;
        }
    }
    return ttl_count == 1 ? only_ttl : nullptr;
}

bool same_hardware(const StateDecl& a, const StateDecl& b) {
    return a.dds == b.dds && a.ttl_out == b.ttl_out && a.ttl_in == b.ttl_in &&
           a.duration_ticks == b.duration_ticks;
}

std::size_t hardware_hash(const StateDecl& s) {
    std::size_t h = std::hash<std::int64_t>{}(s.duration_ticks);
    auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
    for (const auto& [ch, d] : s.dds) {
        mix(std::hash<std::string>{}(ch.board));
        mix(std::hash<int>{}(ch.channel));
        mix(std::hash<std::string>{}(d.freq_hz));
        mix(std::hash<std::string>{}(d.amp_frac));
        mix(std::hash<std::string>{}(d.phase_rad));
    }
    for (const auto* masks : {&s.ttl_out, &s.ttl_in}) {
        mix(masks->size());
        for (const auto& [board, m] : *masks) {
            mix(std::hash<std::string>{}(board));
            mix(std::hash<std::uint32_t>{}(m));
        }
    }
    return h;
}

std::string Operand::str() const { return is_var() ? var() : std::to_string(imm()); }

std::string_view to_string(CmpOp op) {
    switch (op) {
    case CmpOp::LT: return "LT";
    case CmpOp::LE: return "LE";
    case CmpOp::EQ: return "EQ";
    case CmpOp::NE: return "NE";
    case CmpOp::GE: return "GE";
    case CmpOp::GT: return "GT";
    }
    return "?";
}

std::optional<CmpOp> parse_cmp_op(std::string_view text) {
    for (CmpOp op : {CmpOp::LT, CmpOp::LE, CmpOp::EQ, CmpOp::NE, CmpOp::GE, CmpOp::GT}) {
        if (to_string(op) == text) {
            return op;
        }
    }
    return std::nullopt;
}

CmpOp negate(CmpOp op) {
    switch (op) {
    case CmpOp::LT: return CmpOp::GE;
    case CmpOp::LE: return CmpOp::GT;
    case CmpOp::EQ: return CmpOp::NE;
    case CmpOp::NE: return CmpOp::EQ;
    case CmpOp::GE: return CmpOp::LT;
    case CmpOp::GT: return CmpOp::LE;
    }
    return op;
}

bool evaluate(CmpOp op, std::int32_t lhs, std::int32_t rhs) {
    switch (op) {
    case CmpOp::LT: return lhs < rhs;
    case CmpOp::LE: return lhs <= rhs;
    case CmpOp::EQ: return lhs == rhs;
    case CmpOp::NE: return lhs != rhs;
    case CmpOp::GE: return lhs >= rhs;
    case CmpOp::GT: return lhs > rhs;
    }
    return false;
}

std::string CondExpr::str() const {
    return lhs.str() + " " + std::string(to_string(op)) + " " + rhs.str();
}

std::string ArithExpr::str() const {
    switch (kind) {
    case Kind::Const: return std::to_string(value);
    case Kind::Var: return var;
    case Kind::Add: return "(" + args[0].str() + " + " + args[1].str() + ")";
    case Kind::Sub: return "(" + args[0].str() + " - " + args[1].str() + ")";
    }
    return "?";
}

ArithExpr ArithExpr::constant(std::int32_t v) {
    ArithExpr e;
    e.kind = Kind::Const;
    e.value = v;
    return e;
}

ArithExpr ArithExpr::variable(std::string name) {
    ArithExpr e;
    e.kind = Kind::Var;
    e.var = std::move(name);
    return e;
}

ArithExpr ArithExpr::add(ArithExpr a, ArithExpr b) {
    ArithExpr e;
    e.kind = Kind::Add;
    e.args = {std::move(a), std::move(b)};
    return e;
}

ArithExpr ArithExpr::sub(ArithExpr a, ArithExpr b) {
    ArithExpr e;
    e.kind = Kind::Sub;
    e.args = {std::move(a), std::move(b)};
    return e;
}

std::optional<std::size_t> SeqProgram::state_index(std::string_view name) const {
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i].name == name) {
            return i;
        }
    }
    return std::nullopt;
}

std::optional<std::string> canonical_decimal(std::string_view text) {
    std::size_t pos = 0;
    bool negative = false;
    if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) {
        negative = text[pos] == '-';
        ++pos;
    }
    std::string int_part;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
        int_part += text[pos++];
    }
    std::string frac_part;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            frac_part += text[pos++];
        }
        if (frac_part.empty()) {
            return std::nullopt;
        }
    }
    if (pos != text.size() || int_part.empty()) {
        return std::nullopt;
    }
    int_part.erase(0, std::min(int_part.find_first_not_of('0'), int_part.size() - 1));
    while (!frac_part.empty() && frac_part.back() == '0') {
        frac_part.pop_back();
    }
    std::string out = int_part;
    if (!frac_part.empty()) {
        out += "." + frac_part;
    }
    if (negative && out != "0") {
        out = "-" + out;
    }
    return out;
}

namespace {

// ---------------------------------------------------------------- parsing

class Parser {
public:
    SeqProgram parse(const json& doc) {
        expect_object(doc, "document");
        check_keys(doc, {"schema_version", "config", "states", "body", "scan"},
                   {"schema_version", "config", "states", "body"}, "document");
        const auto& version = doc.at("schema_version");
        if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
            throw SchemaError("document: unsupported schema_version (expected " +
                              std::to_string(kSchemaVersion) + ")");
        }
        SeqProgram p;
        p.config = parse_config(doc.at("config"));
        config_ = &p.config;
        expect_array(doc.at("states"), "states");
        std::set<std::string> names;
        for (const auto& s : doc.at("states")) {
            StateDecl decl = parse_state(s);
            if (!names.insert(decl.name).second) {
                throw ValidationError("state '" + decl.name + "' declared twice");
            }
            p.states.push_back(std::move(decl));
        }
        states_ = &p.states;
        p.body = parse_body(doc.at("body"), "body");
        if (doc.contains("scan")) {
            p.scan = parse_scan(doc.at("scan"), p);
        }
        return p;
    }

private:
    static void expect_object(const json& j, const std::string& where) {
        if (!j.is_object()) {
            throw SchemaError(where + ": expected object");
        }
    }

    static void expect_array(const json& j, const std::string& where) {
        if (!j.is_array()) {
            throw SchemaError(where + ": expected array");
        }
    }

    static void check_keys(const json& j, std::initializer_list<const char*> allowed,
                           std::initializer_list<const char*> required, const std::string& where) {
        for (const auto& [key, _] : j.items()) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
                throw SchemaError(where + ": unknown field '" + key + "'");
            }
        }
        for (const char* r : required) {
            if (!j.contains(r)) {
                throw SchemaError(where + ": missing field '" + r + "'");
            }
        }
    }

    static std::string get_string(const json& j, const char* key, const std::string& where) {
        const auto& v = j.at(key);
        if (!v.is_string()) {
            throw SchemaError(where + ": field '" + key + "' must be a string");
        }
        return v.get<std::string>();
    }

    static std::int64_t get_int(const json& j, const char* key, const std::string& where) {
        const auto& v = j.at(key);
        if (!v.is_number_integer()) {
            throw SchemaError(where + ": field '" + key + "' must be an integer");
        }
        return v.get<std::int64_t>();
    }

    static std::int32_t to_i32(std::int64_t v, const std::string& where) {
        if (v < INT32_MIN || v > INT32_MAX) {
            throw ValidationError(where + ": constant out of 32-bit signed range");
        }
        return static_cast<std::int32_t>(v);
    }

    static std::string get_decimal(const json& j, const char* key, const std::string& where) {
        auto canon = canonical_decimal(get_string(j, key, where));
        if (!canon) {
            throw SchemaError(where + ": field '" + key + "' must be a decimal string");
        }
        return *canon;
    }

    static bool valid_identifier(const std::string& name) {
        if (name.empty() || !(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) {
            return false;
        }
        return std::all_of(name.begin(), name.end(),
                           [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
    }

    SystemConfig parse_config(const json& j) {
        expect_object(j, "config");
        check_keys(j, {"boards", "clock_tick_ns"}, {"boards"}, "config");
        SystemConfig cfg;
        if (j.contains("clock_tick_ns")) {
            cfg.clock_tick_ns = static_cast<int>(get_int(j, "clock_tick_ns", "config"));
            if (cfg.clock_tick_ns <= 0) {
                throw ValidationError("config: clock_tick_ns must be positive");
            }
        }
        expect_array(j.at("boards"), "config.boards");
        std::set<std::string> ids;
        int counter_flags = 0;
        for (const auto& b : j.at("boards")) {
            expect_object(b, "board");
            check_keys(b, {"id", "kind", "channels", "counters"}, {"id", "kind", "channels"}, "board");
            BoardDecl decl;
            decl.id = get_string(b, "id", "board");
            const std::string where = "board '" + decl.id + "'";
            const std::string kind = get_string(b, "kind", where);
            if (kind == "DDS") {
                decl.kind = BoardKind::DDS;
            } else if (kind == "TTL") {
                decl.kind = BoardKind::TTL;
            } else {
                throw SchemaError(where + ": kind must be DDS or TTL");
            }
            decl.channel_count = static_cast<int>(get_int(b, "channels", where));
            if (decl.channel_count < 1 || decl.channel_count > 32) {
                throw ValidationError(where + ": channels must be in [1, 32]");
            }
            if (b.contains("counters")) {
                if (!b.at("counters").is_boolean()) {
                    throw SchemaError(where + ": counters must be a boolean");
                }
                decl.counters = b.at("counters").get<bool>();
                if (decl.counters && decl.kind != BoardKind::TTL) {
                    throw ValidationError(where + ": only TTL boards own photon counters");
                }
                counter_flags += decl.counters ? 1 : 0;
            }
            if (decl.id.empty() || !ids.insert(decl.id).second) {
                throw ValidationError(where + ": board ids must be unique and non-empty");
            }
            cfg.boards.push_back(std::move(decl));
        }
        if (counter_flags > 1) {
            throw ValidationError("config: at most one board may own photon counters");
        }
        return cfg;
    }

    const BoardDecl& board_of(const std::string& id, const std::string& where) const {
        const BoardDecl* b = config_->find(id);
        if (b == nullptr) {
            throw ValidationError(where + ": unknown board '" + id + "'");
        }
        return *b;
    }

    std::map<std::string, std::uint32_t> parse_masks(const json& j, const std::string& where) {
        expect_object(j, where);
        std::map<std::string, std::uint32_t> masks;
        for (const auto& [board, value] : j.items()) {
            const BoardDecl& b = board_of(board, where);
            if (b.kind != BoardKind::TTL) {
                throw ValidationError(where + ": board '" + board + "' is not a TTL board");
            }
            if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
                throw SchemaError(where + ": masks must be non-negative integers");
            }
            const auto m = value.get<std::uint64_t>();
            const std::uint64_t limit = b.channel_count >= 32 ? 0xffffffffULL : ((1ULL << b.channel_count) - 1);
            if (m > limit) {
                throw ValidationError(where + ": mask for '" + board + "' exceeds channel count");
            }
            masks[board] = static_cast<std::uint32_t>(m);
        }
        return masks;
    }

    StateDecl parse_state(const json& j) {
        expect_object(j, "state");
        check_keys(j, {"name", "duration_ticks", "dds", "ttl_out", "ttl_in"}, {"name", "duration_ticks"}, "state");
        StateDecl s;
        s.name = get_string(j, "name", "state");
        const std::string where = "state '" + s.name + "'";
        if (s.name.empty()) {
            throw ValidationError("state: empty name");
        }
        s.duration_ticks = get_int(j, "duration_ticks", where);
        if (s.duration_ticks < 1 || s.duration_ticks > UINT32_MAX) {
            throw ValidationError(where + ": duration_ticks must be in [1, 2^32)");
        }
        if (j.contains("dds")) {
            expect_array(j.at("dds"), where + ".dds");
            for (const auto& d : j.at("dds")) {
                expect_object(d, where + ".dds[]");
                check_keys(d, {"board", "channel", "freq_hz", "amp_frac", "phase_rad"},
                           {"board", "channel", "freq_hz", "amp_frac", "phase_rad"}, where + ".dds[]");
                ChannelRef ch;
                ch.board = get_string(d, "board", where);
                ch.channel = static_cast<int>(get_int(d, "channel", where));
                ch.kind = ChannelKind::DDS_OUT;
                const BoardDecl& b = board_of(ch.board, where);
                if (b.kind != BoardKind::DDS) {
                    throw ValidationError(where + ": board '" + ch.board + "' is not a DDS board");
                }
                if (ch.channel < 0 || ch.channel >= b.channel_count) {
                    throw ValidationError(where + ": channel " + std::to_string(ch.channel) + " out of range");
                }
                DdsSetting setting;
                setting.freq_hz = get_decimal(d, "freq_hz", where);
                setting.amp_frac = get_decimal(d, "amp_frac", where);
                setting.phase_rad = get_decimal(d, "phase_rad", where);
                const long double amp = std::stold(setting.amp_frac);
                if (amp < 0.0L || amp > 1.0L) {
                    throw ValidationError(where + ": amp_frac must be in [0, 1]");
                }
                if (std::stold(setting.freq_hz) < 0.0L) {
                    throw ValidationError(where + ": freq_hz must be non-negative");
                }
                if (!s.dds.emplace(ch, setting).second) {
                    throw ValidationError(where + ": channel configured twice");
                }
            }
        }
        if (j.contains("ttl_out")) {
            s.ttl_out = parse_masks(j.at("ttl_out"), where + ".ttl_out");
        }
        if (j.contains("ttl_in")) {
            s.ttl_in = parse_masks(j.at("ttl_in"), where + ".ttl_in");
        }
        return s;
    }

    SourceLoc parse_loc(const json& j) {
        expect_object(j, "loc");
        check_keys(j, {"file", "line"}, {"file", "line"}, "loc");
        SourceLoc loc;
        loc.file = get_string(j, "file", "loc");
        loc.line = static_cast<int>(get_int(j, "line", "loc"));
        return loc;
    }

    Operand parse_operand(const json& j, const std::string& where) {
        expect_object(j, where);
        if (j.size() != 1) {
            throw SchemaError(where + ": operand must be {\"var\": name} or {\"const\": int}");
        }
        if (j.contains("var")) {
            std::string name = get_string(j, "var", where);
            if (!valid_identifier(name)) {
                throw ValidationError(where + ": invalid variable name '" + name + "'");
            }
            return Operand::of_var(std::move(name));
        }
        if (j.contains("const")) {
            return Operand::of_imm(to_i32(get_int(j, "const", where), where));
        }
        throw SchemaError(where + ": operand must be {\"var\": name} or {\"const\": int}");
    }

    CondExpr parse_cond(const json& j, const std::string& where) {
        expect_object(j, where);
        check_keys(j, {"lhs", "op", "rhs"}, {"lhs", "op", "rhs"}, where);
        CondExpr c;
        c.lhs = parse_operand(j.at("lhs"), where + ".lhs");
        c.rhs = parse_operand(j.at("rhs"), where + ".rhs");
        auto op = parse_cmp_op(get_string(j, "op", where));
        if (!op) {
            throw SchemaError(where + ": op must be one of LT LE EQ NE GE GT");
        }
        c.op = *op;
        return c;
    }

    ArithExpr parse_expr(const json& j, const std::string& where) {
        expect_object(j, where);
        if (j.contains("op")) {
            check_keys(j, {"op", "args"}, {"op", "args"}, where);
            const std::string op = get_string(j, "op", where);
            const auto& args = j.at("args");
            if (!args.is_array() || args.size() != 2) {
                throw SchemaError(where + ": args must be an array of two expressions");
            }
            auto a = parse_expr(args[0], where + ".args[0]");
            auto b = parse_expr(args[1], where + ".args[1]");
            if (op == "add") {
                return ArithExpr::add(std::move(a), std::move(b));
            }
            if (op == "sub") {
                return ArithExpr::sub(std::move(a), std::move(b));
            }
            throw SchemaError(where + ": op must be add or sub");
        }
        Operand leaf = parse_operand(j, where);
        return leaf.is_var() ? ArithExpr::variable(leaf.var()) : ArithExpr::constant(leaf.imm());
    }

    NodeList parse_body(const json& j, const std::string& where) {
        expect_array(j, where);
        NodeList out;
        for (const auto& n : j) {
            out.push_back(parse_node(n));
        }
        return out;
    }

    SeqNode parse_node(const json& j) {
        expect_object(j, "node");
        if (!j.contains("kind") || !j.at("kind").is_string()) {
            throw SchemaError("node: missing string field 'kind'");
        }
        if (!j.contains("loc")) {
            throw SchemaError("node: missing field 'loc'");
        }
        const std::string kind = j.at("kind").get<std::string>();
        SeqNode node;
        node.loc = parse_loc(j.at("loc"));
        const std::string where = kind + " at " + node.loc.str();

        if (kind == "play") {
            check_keys(j, {"kind", "loc", "state"}, {"state"}, where);
            Play play{get_string(j, "state", where)};
            bool known = std::any_of(states_->begin(), states_->end(),
                                     [&](const StateDecl& s) { return s.name == play.state; });
            if (!known) {
                throw ValidationError(where + ": unknown state '" + play.state + "'");
            }
            node.node = std::move(play);
        } else if (kind == "loop") {
            check_keys(j, {"kind", "loc", "count", "body"}, {"count", "body"}, where);
            Loop loop;
            loop.count = get_int(j, "count", where);
            if (loop.count < 1) {
                throw ValidationError(where + ": loop count must be >= 1");
            }
            if (loop.count > INT32_MAX) {
                throw ValidationError(where + ": loop count exceeds 32-bit range");
            }
            loop.body = parse_body(j.at("body"), where);
            node.node = std::move(loop);
        } else if (kind == "while") {
            check_keys(j, {"kind", "loc", "cond", "body"}, {"cond", "body"}, where);
            While w;
            w.cond = parse_cond(j.at("cond"), where + ".cond");
            w.body = parse_body(j.at("body"), where);
            node.node = std::move(w);
        } else if (kind == "if") {
            check_keys(j, {"kind", "loc", "cond", "then", "else"}, {"cond", "then"}, where);
            If branch;
            branch.cond = parse_cond(j.at("cond"), where + ".cond");
            branch.then_body = parse_body(j.at("then"), where);
            if (j.contains("else")) {
                branch.else_body = parse_body(j.at("else"), where);
            }
            node.node = std::move(branch);
        } else if (kind == "read_ttl") {
            check_keys(j, {"kind", "loc", "target", "counter"}, {"target", "counter"}, where);
            ReadTtl r;
            r.target = get_string(j, "target", where);
            if (!valid_identifier(r.target)) {
                throw ValidationError(where + ": invalid variable name '" + r.target + "'");
            }
            const auto& c = j.at("counter");
            expect_object(c, where + ".counter");
            check_keys(c, {"board", "channel"}, {"board", "channel"}, where + ".counter");
            r.counter.board = get_string(c, "board", where);
            r.counter.channel = static_cast<int>(get_int(c, "channel", where));
            r.counter.kind = ChannelKind::TTL_IN;
            const BoardDecl& b = board_of(r.counter.board, where);
            if (r.counter.channel < 0 || r.counter.channel >= b.channel_count) {
                throw ValidationError(where + ": counter channel out of range");
            }
            node.node = std::move(r);
        } else if (kind == "assign") {
            check_keys(j, {"kind", "loc", "target", "expr"}, {"target", "expr"}, where);
            Assign a;
            a.target = get_string(j, "target", where);
            if (!valid_identifier(a.target)) {
                throw ValidationError(where + ": invalid variable name '" + a.target + "'");
            }
            a.expr = parse_expr(j.at("expr"), where + ".expr");
            node.node = std::move(a);
        } else if (kind == "wait_resume") {
            check_keys(j, {"kind", "loc", "tag"}, {"tag"}, where);
            node.node = WaitResume{get_string(j, "tag", where)};
        } else {
            throw SchemaError("node at " + node.loc.str() + ": unknown kind '" + kind + "'");
        }
        return node;
    }

    ScanSpec parse_scan(const json& j, const SeqProgram& p) {
        expect_object(j, "scan");
        check_keys(j, {"state", "field", "points"}, {"state", "field", "points"}, "scan");
        ScanSpec scan;
        scan.state = get_string(j, "state", "scan");
        scan.field = get_string(j, "field", "scan");
        expect_array(j.at("points"), "scan.points");
        for (const auto& pt : j.at("points")) {
            if (!pt.is_string()) {
                throw SchemaError("scan.points: entries must be decimal strings");
            }
            auto canon = canonical_decimal(pt.get<std::string>());
            if (!canon) {
                throw SchemaError("scan.points: '" + pt.get<std::string>() + "' is not a decimal");
            }
            scan.points.push_back(*canon);
        }
        if (scan.points.empty()) {
            throw ValidationError("scan: points must be non-empty");
        }
        try {
            for (const auto& pt : scan.points) {
                (void)apply_scan_point(p, scan, pt);
            }
        } catch (const ScanTargetError& e) {
            throw ValidationError(std::string("scan: ") + e.what());
        }
        return scan;
    }

    const SystemConfig* config_ = nullptr;
    const std::vector<StateDecl>* states_ = nullptr;
};

// ---------------------------------------------------------- serialization

json operand_json(const Operand& o) {
    return o.is_var() ? json{{"var", o.var()}} : json{{"const", o.imm()}};
}

json cond_json(const CondExpr& c) {
    return json{{"lhs", operand_json(c.lhs)}, {"op", std::string(to_string(c.op))}, {"rhs", operand_json(c.rhs)}};
}

json expr_json(const ArithExpr& e) {
    switch (e.kind) {
    case ArithExpr::Kind::Const: return json{{"const", e.value}};
    case ArithExpr::Kind::Var: return json{{"var", e.var}};
    case ArithExpr::Kind::Add: return json{{"op", "add"}, {"args", {expr_json(e.args[0]), expr_json(e.args[1])}}};
    case ArithExpr::Kind::Sub: return json{{"op", "sub"}, {"args", {expr_json(e.args[0]), expr_json(e.args[1])}}};
    }
    return json{};
}

json body_json(const NodeList& body);

json node_json(const SeqNode& n) {
    json j;
    j["loc"] = {{"file", n.loc.file}, {"line", n.loc.line}};
    std::visit(
        [&j](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Play>) {
                j["kind"] = "play";
                j["state"] = v.state;
            } else if constexpr (std::is_same_v<T, Loop>) {
                j["kind"] = "loop";
                j["count"] = v.count;
                j["body"] = body_json(v.body);
            } else if constexpr (std::is_same_v<T, While>) {
                j["kind"] = "while";
                j["cond"] = cond_json(v.cond);
                j["body"] = body_json(v.body);
            } else if constexpr (std::is_same_v<T, If>) {
                j["kind"] = "if";
                j["cond"] = cond_json(v.cond);
                j["then"] = body_json(v.then_body);
                if (v.else_body) {
                    j["else"] = body_json(*v.else_body);
                }
            } else if constexpr (std::is_same_v<T, ReadTtl>) {
                j["kind"] = "read_ttl";
                j["target"] = v.target;
                j["counter"] = {{"board", v.counter.board}, {"channel", v.counter.channel}};
            } else if constexpr (std::is_same_v<T, Assign>) {
                j["kind"] = "assign";
                j["target"] = v.target;
                j["expr"] = expr_json(v.expr);
            } else if constexpr (std::is_same_v<T, WaitResume>) {
                j["kind"] = "wait_resume";
                j["tag"] = v.tag;
            }
        },
        n.node);
    return j;
}

json body_json(const NodeList& body) {
    json arr = json::array();
    for (const auto& n : body) {
        arr.push_back(node_json(n));
    }
    return arr;
}

// ------------------------------------------------------------- diagnostics

class VariableChecker {
public:
    VariableChecker(const SeqProgram& p, std::vector<Diagnostic>& out) : program_(p), out_(out) {}

    void run() { (void)walk(program_.body, {}); }

private:
    using VarSet = std::set<std::string>;

    void use(const Operand& o, const VarSet& defined, const SourceLoc& loc) {
        if (o.is_var()) {
            use(o.var(), defined, loc);
        }
    }

    void use(const std::string& var, const VarSet& defined, const SourceLoc& loc) {
        if (!defined.contains(var) && reported_.insert({var, loc.str()}).second) {
            out_.push_back({"use-before-def", "variable '" + var + "' is used before any definition", loc});
        }
    }

    void use(const ArithExpr& e, const VarSet& defined, const SourceLoc& loc) {
        if (e.kind == ArithExpr::Kind::Var) {
            use(e.var, defined, loc);
        }
        for (const auto& a : e.args) {
            use(a, defined, loc);
        }
    }

    // Returns the set of variables that may be defined after `body` runs.
    VarSet walk(const NodeList& body, VarSet defined) {
        for (const auto& n : body) {
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, Play>) {
                        if (!program_.state_index(v.state)) {
                            out_.push_back({"unknown-state", "state '" + v.state + "' is not declared", n.loc});
                        }
                    } else if constexpr (std::is_same_v<T, Loop>) {
                        defined = loop_fixpoint(v.body, defined, nullptr, n.loc);
                    } else if constexpr (std::is_same_v<T, While>) {
                        defined = loop_fixpoint(v.body, defined, &v.cond, n.loc);
                    } else if constexpr (std::is_same_v<T, If>) {
                        use(v.cond.lhs, defined, n.loc);
                        use(v.cond.rhs, defined, n.loc);
                        VarSet after = walk(v.then_body, defined);
                        if (v.else_body) {
                            VarSet other = walk(*v.else_body, defined);
                            after.insert(other.begin(), other.end());
                        }
                        defined = std::move(after);
                    } else if constexpr (std::is_same_v<T, ReadTtl>) {
                        check_counter(v, n.loc);
                        defined.insert(v.target);
                    } else if constexpr (std::is_same_v<T, Assign>) {
                        use(v.expr, defined, n.loc);
                        defined.insert(v.target);
                    }
                },
                n.node);
        }
        return defined;
    }

    VarSet loop_fixpoint(const NodeList& body, VarSet defined, const CondExpr* cond, const SourceLoc& loc) {
        // Definitions from a previous iteration may reach uses in the body;
        // iterate the may-define set to its fixed point before reporting.
        VarSet reach = defined;
        for (;;) {
            std::vector<Diagnostic> scratch;
            VariableChecker probe(program_, scratch);
            VarSet next = probe.walk(body, reach);
            next.insert(reach.begin(), reach.end());
            if (next == reach) {
                break;
            }
            reach = std::move(next);
        }
        if (cond != nullptr) {
            use(cond->lhs, reach, loc);
            use(cond->rhs, reach, loc);
        }
        return walk(body, reach);
    }

    void check_counter(const ReadTtl& r, const SourceLoc& loc) {
        const BoardDecl* b = program_.config.find(r.counter.board);
        if (b == nullptr || b->kind != BoardKind::TTL) {
            out_.push_back({"read-ttl-channel", "read_ttl counter must be a TTL input channel, got board '" +
                                                    r.counter.board + "'",
                            loc});
        } else if (b != program_.config.counter_board()) {
            out_.push_back({"read-ttl-channel", "read_ttl counter board '" + r.counter.board +
                                                    "' is not the designated counter board",
                            loc});
        }
    }

    const SeqProgram& program_;
    std::vector<Diagnostic>& out_;
    std::set<std::pair<std::string, std::string>> reported_;
};

}  // namespace

SeqProgram parse_program(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("malformed JSON: ") + e.what());
    }
    try {
        return Parser{}.parse(doc);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad document shape: ") + e.what());
    }
}

SeqProgram load_program(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SchemaError("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_program(ss.str());
}

std::string serialize_program(const SeqProgram& p) {
    json doc;
    doc["schema_version"] = kSchemaVersion;
    json boards = json::array();
    for (const auto& b : p.config.boards) {
        json jb = {{"id", b.id}, {"kind", std::string(to_string(b.kind))}, {"channels", b.channel_count}};
        if (b.counters) {
            jb["counters"] = true;
        }
        boards.push_back(std::move(jb));
    }
    doc["config"] = {{"boards", boards}, {"clock_tick_ns", p.config.clock_tick_ns}};
    json states = json::array();
    for (const auto& s : p.states) {
        json js = {{"name", s.name}, {"duration_ticks", s.duration_ticks}};
        if (!s.dds.empty()) {
            json dds = json::array();
            for (const auto& [ch, d] : s.dds) {
                dds.push_back({{"board", ch.board},
                               {"channel", ch.channel},
                               {"freq_hz", d.freq_hz},
                               {"amp_frac", d.amp_frac},
                               {"phase_rad", d.phase_rad}});
            }
            js["dds"] = std::move(dds);
        }
        if (!s.ttl_out.empty()) {
            js["ttl_out"] = s.ttl_out;
        }
        if (!s.ttl_in.empty()) {
            js["ttl_in"] = s.ttl_in;
        }
        states.push_back(std::move(js));
    }
    doc["states"] = std::move(states);
    doc["body"] = body_json(p.body);
    if (p.scan) {
        doc["scan"] = {{"state", p.scan->state}, {"field", p.scan->field}, {"points", p.scan->points}};
    }
    return doc.dump(2) + "\n";
}

std::vector<Diagnostic> validate_variables(const SeqProgram& program) {
    std::vector<Diagnostic> out;
    VariableChecker(program, out).run();
    return out;
}

SeqProgram apply_scan_point(const SeqProgram& program, const ScanSpec& scan, const std::string& point) {
    SeqProgram out = program;
    auto idx = out.state_index(scan.state);
    if (!idx) {
        throw ScanTargetError("scan target state '" + scan.state + "' is not declared");
    }
    StateDecl& s = out.states[*idx];
    const auto canon = canonical_decimal(point);
    if (!canon) {
        throw ScanTargetError("scan point '" + point + "' is not a decimal");
    }
    if (scan.field == "duration_ticks") {
        if (canon->find('.') != std::string::npos || canon->front() == '-') {
            throw ScanTargetError("duration scan points must be positive integers");
        }
        const auto ticks = std::stoll(*canon);
        if (ticks < 1 || ticks > UINT32_MAX) {
            throw ScanTargetError("duration scan point out of range");
        }
        s.duration_ticks = ticks;
        return out;
    }
    // dds/<board>/<channel>/<field>
    std::vector<std::string> parts;
    std::stringstream ss(scan.field);
    for (std::string part; std::getline(ss, part, '/');) {
        parts.push_back(part);
    }
    if (parts.size() != 4 || parts[0] != "dds") {
        throw ScanTargetError("unsupported scan field '" + scan.field + "'");
    }
    ChannelRef ch;
    ch.board = parts[1];
    try {
        ch.channel = std::stoi(parts[2]);
    } catch (const std::exception&) {
        throw ScanTargetError("bad channel in scan field '" + scan.field + "'");
    }
    ch.kind = ChannelKind::DDS_OUT;
    auto it = s.dds.find(ch);
    if (it == s.dds.end()) {
        throw ScanTargetError("state '" + s.name + "' does not configure " + ch.board + "/" + parts[2]);
    }
    if (parts[3] == "freq_hz") {
        if (canon->front() == '-') {
            throw ScanTargetError("frequency scan points must be non-negative");
        }
        it->second.freq_hz = *canon;
    } else if (parts[3] == "amp_frac") {
        const long double amp = std::stold(*canon);
        if (amp < 0.0L || amp > 1.0L) {
            throw ScanTargetError("amplitude scan points must be in [0, 1]");
        }
        it->second.amp_frac = *canon;
    } else if (parts[3] == "phase_rad") {
        it->second.phase_rad = *canon;
    } else {
        throw ScanTargetError("unknown DDS field '" + parts[3] + "'");
    }
    return out;
}

// ---------------------------------------------------------------- builder

ProgramBuilder::ProgramBuilder(SystemConfig config, std::string file) : file_(std::move(file)) {
    program_.config = std::move(config);
}

SourceLoc ProgramBuilder::next_loc() { return SourceLoc{file_, ++line_}; }

void ProgramBuilder::push(SeqNode node) {
    if (open_.empty()) {
        program_.body.push_back(std::move(node));
        return;
    }
    Frame& top = open_.back();
    std::visit(
        [&](auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Loop> || std::is_same_v<T, While>) {
                v.body.push_back(std::move(node));
            } else if constexpr (std::is_same_v<T, If>) {
                (top.in_else ? *v.else_body : v.then_body).push_back(std::move(node));
            }
        },
        top.node.node);
}

ProgramBuilder& ProgramBuilder::state(StateDecl s) {
    program_.states.push_back(std::move(s));
    return *this;
}

ProgramBuilder& ProgramBuilder::play(const std::string& state) {
    push(SeqNode{Play{state}, next_loc()});
    return *this;
}

ProgramBuilder& ProgramBuilder::read_ttl(const std::string& target, ChannelRef counter) {
    counter.kind = ChannelKind::TTL_IN;
    push(SeqNode{ReadTtl{target, std::move(counter)}, next_loc()});
    return *this;
}

ProgramBuilder& ProgramBuilder::assign(const std::string& target, ArithExpr expr) {
    push(SeqNode{Assign{target, std::move(expr)}, next_loc()});
    return *this;
}

ProgramBuilder& ProgramBuilder::wait_resume(const std::string& tag) {
    push(SeqNode{WaitResume{tag}, next_loc()});
    return *this;
}

ProgramBuilder& ProgramBuilder::loop(std::int64_t count) {
    open_.push_back(Frame{SeqNode{Loop{count, {}}, next_loc()}});
    return *this;
}

ProgramBuilder& ProgramBuilder::while_(CondExpr cond) {
    open_.push_back(Frame{SeqNode{While{std::move(cond), {}}, next_loc()}});
    return *this;
}

ProgramBuilder& ProgramBuilder::if_(CondExpr cond) {
    open_.push_back(Frame{SeqNode{If{std::move(cond), {}, std::nullopt}, next_loc()}});
    return *this;
}

ProgramBuilder& ProgramBuilder::else_() {
    if (open_.empty() || !std::holds_alternative<If>(open_.back().node.node) || open_.back().in_else) {
        throw ValidationError("else_ without an open if_");
    }
    std::get<If>(open_.back().node.node).else_body = NodeList{};
    open_.back().in_else = true;
    return *this;
}

ProgramBuilder& ProgramBuilder::end() {
    if (open_.empty()) {
        throw ValidationError("end() without an open block");
    }
    SeqNode node = std::move(open_.back().node);
    open_.pop_back();
    push(std::move(node));
    return *this;
}

SeqProgram ProgramBuilder::build() const {
    if (!open_.empty()) {
        throw ValidationError("unbalanced builder: " + std::to_string(open_.size()) + " open block(s)");
    }
    return program_;
}

}  // namespace bell
