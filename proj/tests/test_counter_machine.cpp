#include "difflab/counter_machine.hpp"
#include "difflab/rng.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace difflab;
using namespace difflab::cm;

namespace {

std::string data_path(const std::string& name) { return std::string(DIFFLAB_DATA_DIR) + "/" + name; }

// language oracle, independent of the interpreter
bool is_anbn(const std::string& w) {
    size_t i = 0;
    while (i < w.size() && w[i] == 'a') ++i;
    size_t j = i;
    while (j < w.size() && w[j] == 'b') ++j;
    return j == w.size() && i == w.size() - i;
}

std::vector<std::string> words_up_to(const std::string& alphabet, int max_len) {
    std::vector<std::string> out{""};
    std::vector<std::string> level{""};
    for (int len = 1; len <= max_len; ++len) {
        std::vector<std::string> next;
        for (const auto& w : level)
            for (char c : alphabet) {
                next.push_back(w + c);
                out.push_back(w + c);
            }
        level = std::move(next);
    }
    return out;
}

} // namespace

TEST_CASE("smallest program: a single accepting HALT") {
    Program p = parse_program("1: HALT accept\n");
    CHECK(p.size() == 1);
    CHECK(p.register_count == 0);
    CHECK(p.alphabet.empty());
    ExecResult r = run(p, "", 10);
    CHECK(r.verdict == Verdict::accept);
    CHECK(r.steps == 1);
}

TEST_CASE("parse errors") {
    SUBCASE("dangling jump target") {
        const char* src =
            "1: CASE * - -> () HEAD 0 JUMP 99\n"
            "2: HALT accept\n"
            "3: HALT reject\n";
        CHECK_THROWS_AS(parse_program(src), ParseError);
    }
    SUBCASE("missing instruction number") {
        CHECK_THROWS_AS(parse_program("1: HALT accept\n3: HALT reject\n"), ParseError);
    }
    SUBCASE("non-total branch table") {
        // covers only the 'z' half of the zero patterns
        const char* src =
            "1: CASE * z -> (0) HEAD 0 JUMP 2\n"
            "2: HALT accept\n";
        CHECK_THROWS_AS(parse_program(src), ParseError);
    }
    SUBCASE("overlapping rows are an error, not first-match-wins") {
        const char* src =
            "1: CASE * * -> (0) HEAD 0 JUMP 2\n"
            "1: CASE a z -> (0) HEAD 0 JUMP 2\n"
            "2: HALT accept\n";
        CHECK_THROWS_AS(parse_program(src), ParseError);
    }
    SUBCASE("delta out of range") {
        CHECK_THROWS_AS(parse_program("1: CASE * * -> (2) HEAD 0 JUMP 1\n"), ParseError);
    }
    SUBCASE("syntax error carries the line number") {
        try {
            parse_program("1: HALT accept\n2: CASE oops\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 2);
        }
    }
}

TEST_CASE("branching example: zero test, register bump, jump") {
    Program p = load_program_file(data_path("paper_example.cm"));
    CHECK(p.size() == 33);
    CHECK(p.register_count == 2);

    MachineState s = initial_state(p);
    s.pc = 32;
    SUBCASE("zero branch increments register 2 and jumps to 23") {
        s.registers = {0, 4};
        auto v = step(p, s, "");
        CHECK(!v.has_value());
        CHECK(s.registers == std::vector<int64_t>{0, 5});
        CHECK(s.pc == 23);
    }
    SUBCASE("nonzero branch leaves registers alone and jumps to 33") {
        s.registers = {5, 4};
        auto v = step(p, s, "");
        CHECK(!v.has_value());
        CHECK(s.registers == std::vector<int64_t>{5, 4});
        CHECK(s.pc == 33);
    }
    SUBCASE("whole program accepts the empty word via line 23") {
        ExecResult r = run(p, "", 100, true);
        CHECK(r.verdict == Verdict::accept);
        CHECK(r.trace.back().pc == 23);
        CHECK(r.trace.back().registers == std::vector<int64_t>{0, 1});
    }
}

TEST_CASE("a^n b^n fixture decides exactly { a^n b^n }") {
    Program p = load_program_file(data_path("anbn.cm"));
    CHECK(p.register_count == 2);
    CHECK(p.alphabet == "ab");

    ExecResult r = run(p, "aabb", 10000);
    CHECK(r.verdict == Verdict::accept);
    CHECK(run(p, "aab", 10000).verdict == Verdict::reject);

    // exhaustive over all words of length <= 16 (spec exercises n <= 8)
    int accepted = 0;
    for (const std::string& w : words_up_to("ab", 16)) {
        const Verdict v = run(p, w, 100000).verdict;
        REQUIRE(v != Verdict::step_limit);
        const bool expect = is_anbn(w);
        if (v == Verdict::accept) ++accepted;
        CHECK((v == Verdict::accept) == expect);
    }
    CHECK(accepted == 9); // n = 0..8
}

TEST_CASE("unary parity fixture") {
    Program p = load_program_file(data_path("parity.cm"));
    CHECK(p.register_count == 1);
    for (int n = 0; n <= 12; ++n) {
        const std::string w(n, 'a');
        const Verdict v = run(p, w, 10000).verdict;
        CHECK((v == Verdict::accept) == (n % 2 == 0));
    }
}

TEST_CASE("step limit zero reports step-limit-exceeded") {
    Program p = parse_program("1: HALT accept\n");
    CHECK(run(p, "", 0).verdict == Verdict::step_limit);
}

TEST_CASE("head cannot move past the tape markers") {
    // moves left from position 1 onto '^', then tries to move left again
    const char* src =
        "1: CASE * * -> (0) HEAD -1 JUMP 1\n";
    Program p = parse_program(src);
    MachineState s = initial_state(p);
    CHECK(!step(p, s, "").has_value());
    CHECK(s.head_pos == 0);
    CHECK_THROWS_AS(step(p, s, ""), StepError);
}

TEST_CASE("input outside the alphabet is rejected up front") {
    Program p = load_program_file(data_path("parity.cm"));
    CHECK_THROWS_AS(run(p, "ax", 100), StepError);
}

namespace {

// random-program generator for the property tests
Program random_program(Rng& rng, int k, int n_instr, const std::string& alphabet) {
    std::ostringstream src;
    for (int num = 1; num <= n_instr; ++num) {
        if (num > n_instr - 2) { // last two lines halt so every jump target may halt
            src << num << ": HALT " << (num % 2 ? "accept" : "reject") << "\n";
            continue;
        }
        // one row per (symbol, full zero-pattern) so the table is total
        std::string syms = alphabet + "^$";
        for (char sym : syms) {
            for (int mask = 0; mask < (1 << k); ++mask) {
                src << num << ": CASE " << sym << " ";
                for (int i = 0; i < k; ++i) src << ((mask >> i) & 1 ? 'z' : 'n');
                src << " -> (";
                for (int i = 0; i < k; ++i) {
                    if (i) src << ",";
                    src << static_cast<int>(rng.below(3)) - 1;
                }
                src << ") HEAD ";
                // never walk off the tape: '^' rows move right, '$' rows move left
                int hm;
                if (sym == '^') hm = static_cast<int>(rng.below(2));
                else if (sym == '$') hm = -static_cast<int>(rng.below(2));
                else hm = static_cast<int>(rng.below(3)) - 1;
                src << hm << " JUMP " << 1 + rng.below(n_instr) << "\n";
            }
        }
    }
    return parse_program(src.str());
}

} // namespace

TEST_CASE("property: step soundness and determinism over random programs") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const int k = 1 + static_cast<int>(rng.below(3));
        const int n_instr = 3 + static_cast<int>(rng.below(5));
        Program p = random_program(rng, k, n_instr, "ab");
        std::string input;
        const int len = static_cast<int>(rng.below(6));
        for (int i = 0; i < len; ++i) input += rng.uniform() < 0.5 ? 'a' : 'b';

        ExecResult r1 = run(p, input, 300, true);
        ExecResult r2 = run(p, input, 300, true);
        CHECK(r1.verdict == r2.verdict);
        CHECK(r1.steps == r2.steps);
        REQUIRE(r1.trace.size() == r2.trace.size());
        for (size_t i = 0; i < r1.trace.size(); ++i) CHECK(r1.trace[i] == r2.trace[i]);

        for (size_t i = 0; i + 1 < r1.trace.size(); ++i) {
            const MachineState& a = r1.trace[i];
            const MachineState& b = r1.trace[i + 1];
            for (int j = 0; j < k; ++j)
                CHECK(std::abs(b.registers[j] - a.registers[j]) <= 1);
            CHECK(std::abs(b.head_pos - a.head_pos) <= 1);
            CHECK(b.head_pos >= 0);
            CHECK(b.head_pos <= static_cast<int>(input.size()) + 1);
        }
    }
}
