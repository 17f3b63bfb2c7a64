#pragma once

// Typed node tree for experiment sequences, plus the system configuration the
// tree is compiled against. Programs arrive either from the JSON boundary
// format (see docs/node-tree-schema.md) or from ProgramBuilder.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bell {

inline constexpr int kSchemaVersion = 1;

enum class BoardKind { DDS, TTL };
enum class ChannelKind { DDS_OUT, TTL_OUT, TTL_IN };

std::string_view to_string(BoardKind kind);

struct SourceLoc {
    std::string file;
    int line = 0;

    bool operator==(const SourceLoc&) const = default;
    std::string str() const;
};

struct BoardDecl {
    std::string id;
    BoardKind kind = BoardKind::DDS;
    int channel_count = 1;
    bool counters = false;  // designated photon-counter board

    bool operator==(const BoardDecl&) const = default;
};

struct SystemConfig {
    std::vector<BoardDecl> boards;
    int clock_tick_ns = 4;

    bool operator==(const SystemConfig&) const = default;

    const BoardDecl* find(std::string_view id) const;
    // The TTL board owning the photon counters: the one flagged `counters`,
    // or the only TTL board when none is flagged.
    const BoardDecl* counter_board() const;
};

struct ChannelRef {
    std::string board;
    int channel = 0;
    ChannelKind kind = ChannelKind::DDS_OUT;

    auto operator<=>(const ChannelRef&) const = default;
};

// Decimal numbers stay as canonical decimal strings until step-table encoding.
struct DdsSetting {
    std::string freq_hz = "0";
    std::string amp_frac = "0";
    std::string phase_rad = "0";

    auto operator<=>(const DdsSetting&) const = default;
};

struct StateDecl {
    std::string name;
    std::map<ChannelRef, DdsSetting> dds;
    std::map<std::string, std::uint32_t> ttl_out;  // board id -> mask
    std::map<std::string, std::uint32_t> ttl_in;
    std::int64_t duration_ticks = 1;

    bool operator==(const StateDecl&) const = default;
};

// Hardware identity of a state: everything except its name.
bool same_hardware(const StateDecl& a, const StateDecl& b);
std::size_t hardware_hash(const StateDecl& s);

struct Operand {
    std::variant<std::string, std::int32_t> value;

    bool operator==(const Operand&) const = default;
    bool is_var() const { return std::holds_alternative<std::string>(value); }
    const std::string& var() const { return std::get<std::string>(value); }
    std::int32_t imm() const { return std::get<std::int32_t>(value); }
    std::string str() const;

    static Operand of_var(std::string name) { return Operand{std::move(name)}; }
    static Operand of_imm(std::int32_t v) { return Operand{v}; }
};

enum class CmpOp { LT, LE, EQ, NE, GE, GT };

std::string_view to_string(CmpOp op);
std::optional<CmpOp> parse_cmp_op(std::string_view text);
CmpOp negate(CmpOp op);
bool evaluate(CmpOp op, std::int32_t lhs, std::int32_t rhs);

struct CondExpr {
    Operand lhs;
    CmpOp op = CmpOp::LT;
    Operand rhs;

    bool operator==(const CondExpr&) const = default;
    std::string str() const;
};

struct ArithExpr {
    enum class Kind { Const, Var, Add, Sub };
    Kind kind = Kind::Const;
    std::int32_t value = 0;
    std::string var;
    std::vector<ArithExpr> args;  // two operands for Add/Sub

    bool operator==(const ArithExpr&) const = default;
    std::string str() const;

    static ArithExpr constant(std::int32_t v);
    static ArithExpr variable(std::string name);
    static ArithExpr add(ArithExpr a, ArithExpr b);
    static ArithExpr sub(ArithExpr a, ArithExpr b);
};

struct SeqNode;
using NodeList = std::vector<SeqNode>;

struct Play {
    std::string state;
    bool operator==(const Play&) const = default;
};
struct Loop {
    std::int64_t count = 1;
    NodeList body;
    bool operator==(const Loop&) const = default;
};
struct While {
    CondExpr cond;
    NodeList body;
    bool operator==(const While&) const = default;
};
struct If {
    CondExpr cond;
    NodeList then_body;
    std::optional<NodeList> else_body;
    bool operator==(const If&) const = default;
};
struct ReadTtl {
    std::string target;
    ChannelRef counter;
    bool operator==(const ReadTtl&) const = default;
};
struct Assign {
    std::string target;
    ArithExpr expr;
    bool operator==(const Assign&) const = default;
};
struct WaitResume {
    std::string tag;
    bool operator==(const WaitResume&) const = default;
};

struct SeqNode {
    std::variant<Play, Loop, While, If, ReadTtl, Assign, WaitResume> node;
    SourceLoc loc;

    bool operator==(const SeqNode&) const = default;
};

struct ScanSpec {
    std::string state;
    // "duration_ticks" or "dds/<board>/<channel>/<freq_hz|amp_frac|phase_rad>"
    std::string field;
    std::vector<std::string> points;

    bool operator==(const ScanSpec&) const = default;
};

struct SeqProgram {
    SystemConfig config;
    std::vector<StateDecl> states;
    NodeList body;
    std::optional<ScanSpec> scan;

    bool operator==(const SeqProgram&) const = default;

    std::optional<std::size_t> state_index(std::string_view name) const;
};

struct Diagnostic {
    std::string code;
    std::string message;
    SourceLoc loc;
};

SeqProgram parse_program(std::string_view json_text);
SeqProgram load_program(const std::filesystem::path& path);
std::string serialize_program(const SeqProgram& program);

std::vector<Diagnostic> validate_variables(const SeqProgram& program);

// Canonical form of a decimal literal ("-?digits[.digits]"); nullopt if the
// text is not one.
std::optional<std::string> canonical_decimal(std::string_view text);

// Copy of `program` with the scan target field replaced by `point`.
// Throws ScanTargetError when the target does not resolve.
SeqProgram apply_scan_point(const SeqProgram& program, const ScanSpec& scan, const std::string& point);

// Small fluent helper for building programs in code.
class ProgramBuilder {
public:
    explicit ProgramBuilder(SystemConfig config, std::string file = "<builder>");

    ProgramBuilder& state(StateDecl s);
    ProgramBuilder& play(const std::string& state);
    ProgramBuilder& read_ttl(const std::string& target, ChannelRef counter);
    ProgramBuilder& assign(const std::string& target, ArithExpr expr);
    ProgramBuilder& wait_resume(const std::string& tag);
    ProgramBuilder& loop(std::int64_t count);
    ProgramBuilder& while_(CondExpr cond);
    ProgramBuilder& if_(CondExpr cond);
    ProgramBuilder& else_();
    ProgramBuilder& end();

    SeqProgram build() const;

private:
    SourceLoc next_loc();
    void push(SeqNode node);

    SeqProgram program_;
    std::string file_;
    int line_ = 0;
    // Open containers; each frame points at the node list being appended to.
    struct Frame {
        SeqNode node;
        bool in_else = false;
    };
    std::vector<Frame> open_;
};

}  // namespace bell
