#include "difflab/counter_machine.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace difflab::cm {

namespace {

constexpr int kMaxRegisters = 16; // dense tables are 2^k wide

struct RawCase {
    int src_line;
    char sym;          // alphabet char, '^', '$' or '*'
    std::string zpat;  // over {z,n,*}, possibly "-"
    std::vector<int> deltas;
    int head_move;
    int jump;
};

struct RawHalt {
    int src_line;
    Verdict verdict;
};

std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

int parse_int(const std::string& tok, int line, const char* what) {
    try {
        size_t pos = 0;
        int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw ParseError(line, std::string("bad ") + what + ": '" + tok + "'");
    }
}

std::vector<int> parse_deltas(const std::string& tok, int line) {
    if (tok.size() < 2 || tok.front() != '(' || tok.back() != ')')
        throw ParseError(line, "register deltas must look like (d1,...,dk): '" + tok + "'");
    std::string inner = tok.substr(1, tok.size() - 2);
    std::vector<int> out;
    if (inner.empty()) return out;
    std::istringstream is(inner);
    std::string part;
    while (std::getline(is, part, ',')) {
        int v = parse_int(part, line, "register delta");
        if (v < -1 || v > 1) throw ParseError(line, "register delta out of {-1,0,+1}");
        out.push_back(v);
    }
    return out;
}

} // namespace

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::accept: return "accept";
        case Verdict::reject: return "reject";
        case Verdict::step_limit: return "step-limit-exceeded";
    }
    return "?";
}

int Program::symbol_index(char sym) const {
    if (sym == '^') return static_cast<int>(alphabet.size());
    if (sym == '$') return static_cast<int>(alphabet.size()) + 1;
    auto pos = alphabet.find(sym);
    if (pos == std::string::npos)
        throw StepError(std::string("symbol not in program alphabet: '") + sym + "'");
    return static_cast<int>(pos);
}

char symbol_at(const std::string& input, int head_pos) {
    if (head_pos == 0) return '^';
    if (head_pos == static_cast<int>(input.size()) + 1) return '$';
    return input[head_pos - 1];
}

Program parse_program(const std::string& text) {
    std::map<int, std::vector<RawCase>> cases;
    std::map<int, RawHalt> halts;
    std::set<char> alphabet_set;

    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        auto toks = tokenize(raw);
        if (toks.empty()) continue;

        std::string& head = toks[0];
        if (head.empty() || head.back() != ':')
            throw ParseError(line_no, "expected '<num>:' at start of instruction");
        int num = parse_int(head.substr(0, head.size() - 1), line_no, "instruction number");
        if (num < 1) throw ParseError(line_no, "instruction numbers start at 1");

        if (toks.size() >= 2 && toks[1] == "HALT") {
            if (toks.size() != 3) throw ParseError(line_no, "HALT takes exactly one verdict");
            Verdict v;
            if (toks[2] == "accept") v = Verdict::accept;
            else if (toks[2] == "reject") v = Verdict::reject;
            else throw ParseError(line_no, "HALT verdict must be accept or reject");
            if (halts.count(num) || cases.count(num))
                throw ParseError(line_no, "instruction " + std::to_string(num) + " defined twice");
            halts[num] = RawHalt{line_no, v};
            continue;
        }

        // <num>: CASE <sym> <zpat> -> (<deltas>) HEAD <m> JUMP <t>
        if (toks.size() != 10 || toks[1] != "CASE" || toks[4] != "->" || toks[6] != "HEAD" ||
            toks[8] != "JUMP")
            throw ParseError(line_no,
                             "expected '<num>: CASE <sym> <zpat> -> (<deltas>) HEAD <m> JUMP <t>'");
        if (halts.count(num))
            throw ParseError(line_no,
                             "instruction " + std::to_string(num) + " already defined as HALT");

        RawCase rc;
        rc.src_line = line_no;
        if (toks[2].size() != 1)
            throw ParseError(line_no, "symbol pattern must be one character: '" + toks[2] + "'");
        rc.sym = toks[2][0];
        if (rc.sym != '^' && rc.sym != '$' && rc.sym != '*') {
            if (!std::isgraph(static_cast<unsigned char>(rc.sym)) || rc.sym == '#' ||
                rc.sym == '(' || rc.sym == ')')
                throw ParseError(line_no, "symbol not allowed in alphabet");
            alphabet_set.insert(rc.sym);
        }
        rc.zpat = toks[3];
        if (rc.zpat == "-") rc.zpat.clear();
        for (char c : rc.zpat)
            if (c != 'z' && c != 'n' && c != '*')
                throw ParseError(line_no, "zero-pattern characters must be z, n or *");
        rc.deltas = parse_deltas(toks[5], line_no);
        if (rc.deltas.size() != rc.zpat.size())
            throw ParseError(line_no, "zero-pattern and delta tuple disagree on register count");
        int hm = parse_int(toks[7], line_no, "head move");
        if (hm < -1 || hm > 1) throw ParseError(line_no, "head move out of {-1,0,+1}");
        rc.head_move = hm;
        rc.jump = parse_int(toks[9], line_no, "jump target");
        cases[num].push_back(std::move(rc));
    }

    if (cases.empty() && halts.empty()) throw ParseError(0, "empty program");

    // Instruction numbering must be 1..N with no gaps.
    int max_num = 0;
    for (auto& [n, _] : cases) max_num = std::max(max_num, n);
    for (auto& [n, _] : halts) max_num = std::max(max_num, n);
    for (int n = 1; n <= max_num; ++n)
        if (!cases.count(n) && !halts.count(n))
            throw ParseError(0, "missing instruction number " + std::to_string(n));

    // Register count from the branch rows; HALT-only programs have k = 0.
    int k = -1;
    for (auto& [n, rows] : cases)
        for (auto& rc : rows) {
            if (k < 0) k = static_cast<int>(rc.zpat.size());
            if (static_cast<int>(rc.zpat.size()) != k)
                throw ParseError(rc.src_line, "inconsistent register count across instructions");
        }
    if (k < 0) k = 0;
    if (k > kMaxRegisters) throw ParseError(0, "too many registers (max 16)");

    Program p;
    p.register_count = k;
    p.alphabet.assign(alphabet_set.begin(), alphabet_set.end());
    std::sort(p.alphabet.begin(), p.alphabet.end());
    p.instructions.resize(max_num);

    const int sym_count = p.symbol_count();
    const int zrows = 1 << k;

    for (auto& [n, h] : halts) {
        p.instructions[n - 1].halt_verdict = h.verdict;
    }
    for (auto& [n, rows] : cases) {
        Instruction& ins = p.instructions[n - 1];
        ins.table.assign(static_cast<size_t>(sym_count) * zrows, Effect{});
        std::vector<int> covered_by(static_cast<size_t>(sym_count) * zrows, 0);
        for (auto& rc : rows) {
            if (rc.jump < 1 || rc.jump > max_num)
                throw ParseError(rc.src_line, "jump target " + std::to_string(rc.jump) +
                                                  " outside program [1," +
                                                  std::to_string(max_num) + "]");
            std::vector<int> syms;
            if (rc.sym == '*') {
                for (int i = 0; i < sym_count; ++i) syms.push_back(i);
            } else {
                syms.push_back(p.symbol_index(rc.sym));
            }
            for (int si : syms) {
                for (int mask = 0; mask < zrows; ++mask) {
                    bool match = true;
                    for (int i = 0; i < k && match; ++i) {
                        const bool is_zero = (mask >> i) & 1;
                        if (rc.zpat[i] == 'z' && !is_zero) match = false;
                        if (rc.zpat[i] == 'n' && is_zero) match = false;
                    }
                    if (!match) continue;
                    const size_t idx = static_cast<size_t>(si) * zrows + mask;
                    if (covered_by[idx])
                        throw ParseError(rc.src_line,
                                         "branch overlaps row from line " +
                                             std::to_string(covered_by[idx]) +
                                             " (overlap is an error, not first-match-wins)");
                    covered_by[idx] = rc.src_line;
                    ins.table[idx] = Effect{rc.deltas, rc.head_move, rc.jump};
                }
            }
        }
        for (size_t idx = 0; idx < covered_by.size(); ++idx)
            if (!covered_by[idx]) {
                const int si = static_cast<int>(idx) / zrows;
                std::string sym = si < static_cast<int>(p.alphabet.size())
                                      ? std::string(1, p.alphabet[si])
                                      : (si == static_cast<int>(p.alphabet.size()) ? "^" : "$");
                throw ParseError(rows.front().src_line,
                                 "instruction " + std::to_string(n) +
                                     " branch table not total: symbol '" + sym +
                                     "' zero-mask " + std::to_string(idx % zrows) + " uncovered");
            }
    }
    return p;
}

Program load_program_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open program file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_program(ss.str());
}

MachineState initial_state(const Program& p) {
    MachineState s;
    s.registers.assign(p.register_count, 0);
    s.head_pos = 1;
    s.pc = 1;
    s.step_count = 0;
    return s;
}

std::optional<Verdict> step(const Program& p, MachineState& s, const std::string& input) {
    if (s.pc < 1 || s.pc > p.size())
        throw StepError("program counter out of range: " + std::to_string(s.pc));
    const Instruction& ins = p.instructions[s.pc - 1];
    if (ins.halt_verdict) return *ins.halt_verdict;

    const char sym = symbol_at(input, s.head_pos);
    int zmask = 0;
    for (int i = 0; i < p.register_count; ++i)
        if (s.registers[i] == 0) zmask |= 1 << i;
    const Effect& e = ins.table[static_cast<size_t>(p.symbol_index(sym)) *
                                    (1u << p.register_count) +
                                zmask];

    for (int i = 0; i < p.register_count; ++i) s.registers[i] += e.deltas[i];
    const int new_head = s.head_pos + e.head_move;
    if (new_head < 0 || new_head > static_cast<int>(input.size()) + 1)
        throw StepError("head moved past tape boundary at instruction " + std::to_string(s.pc));
    s.head_pos = new_head;
    s.pc = e.next;
    ++s.step_count;
    return std::nullopt;
}

ExecResult run(const Program& p, const std::string& input, int64_t step_limit, bool record_trace,
               size_t trace_cap) {
    for (char c : input)
        if (p.alphabet.find(c) == std::string::npos)
            throw StepError(std::string("input symbol '") + c + "' not in program alphabet");

    ExecResult res;
    MachineState s = initial_state(p);
    if (record_trace) res.trace.push_back(s);
    int64_t steps = 0;
    while (steps < step_limit) {
        auto verdict = step(p, s, input);
        ++steps;
        if (verdict) {
            res.verdict = *verdict;
            res.steps = steps;
            return res;
        }
        if (record_trace && res.trace.size() < trace_cap) res.trace.push_back(s);
    }
    res.verdict = Verdict::step_limit;
    res.steps = steps;
    return res;
}

} // namespace difflab::cm
