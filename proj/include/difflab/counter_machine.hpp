#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Counter machines: a finite program over k integer registers plus a
// read-only input tape ^w$ with a movable head. Each instruction branches on
// (symbol under the head, zero/nonzero pattern of the registers), adds
// {-1,0,+1} to every register, moves the head by at most one cell and jumps.
// HALT instructions carry an accept/reject verdict.
//
// Assembly format (UTF-8, one instruction per line, '#' starts a comment):
//
//   <num>: CASE <sym> <zpat> -> (<d1,...,dk>) HEAD <-1|0|+1> JUMP <num>
//   <num>: HALT <accept|reject>
//
// <sym> is an alphabet character, '^', '$' or the wildcard '*'. <zpat> is a
// k-character string over {z, n, *} ('-' when k = 0). Wildcard rows expand
// to a dense table; rows covering the same (symbol, pattern) twice are an
// error, and every combination must be covered exactly once.

namespace difflab::cm {

enum class Verdict { accept, reject, step_limit };

const char* verdict_name(Verdict v);

struct ParseError : std::runtime_error {
    int line;
    ParseError(int line_, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

struct StepError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Effect {
    std::vector<int> deltas; // one per register, each in {-1, 0, +1}
    int head_move = 0;       // in {-1, 0, +1}
    int next = 0;            // 1-based target instruction
};

struct Instruction {
    // HALT iff halt_verdict is set. Otherwise `table` is dense, indexed by
    // symbol_index * 2^k + zero_mask (bit i of zero_mask set iff register
    // i+1 is currently zero).
    std::optional<Verdict> halt_verdict;
    std::vector<Effect> table;
};

struct Program {
    std::vector<Instruction> instructions; // index 0 holds line number 1
    int register_count = 0;
    std::string alphabet; // sorted input symbols

    int size() const { return static_cast<int>(instructions.size()); }
    int symbol_count() const { return static_cast<int>(alphabet.size()) + 2; }
    // alphabet symbols first, then '^', then '$'
    int symbol_index(char sym) const;
};

struct MachineState {
    std::vector<int64_t> registers;
    int head_pos = 1; // 0 is '^', n+1 is '$'
    int pc = 1;
    int64_t step_count = 0;

    bool operator==(const MachineState&) const = default;
};

struct ExecResult {
    Verdict verdict = Verdict::step_limit;
    int64_t steps = 0;
    // Visited states in order (initial state first); the last entry is the
    // state in which the HALT instruction ran. Filled only on request.
    std::vector<MachineState> trace;
};

char symbol_at(const std::string& input, int head_pos);

Program parse_program(const std::string& text);
Program load_program_file(const std::string& path);

MachineState initial_state(const Program& p);

// Applies one instruction to `s` in place; returns the verdict instead if
// s.pc names a HALT instruction (s is then left untouched). Throws StepError
// if the selected branch would move the head past '^' or '$'.
std::optional<Verdict> step(const Program& p, MachineState& s, const std::string& input);

ExecResult run(const Program& p, const std::string& input, int64_t step_limit,
               bool record_trace = false, size_t trace_cap = 1u << 20);

} // namespace difflab::cm
