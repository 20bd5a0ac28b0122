#include "difflab/field.hpp"
#include "difflab/groove.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

using namespace difflab;
using namespace difflab::groove;

namespace {

std::string data_path(const std::string& name) { return std::string(DIFFLAB_DATA_DIR) + "/" + name; }

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

TEST_CASE("single-HALT program compiles to a lone terminal cell") {
    cm::Program p = cm::parse_program("1: HALT accept\n");
    ForceFieldSpec spec = compile(p, "", GrooveOptions{});
    CHECK(spec.graph.dim == 3);
    CHECK(spec.graph.waypoints.size() == 1);
    CHECK(spec.graph.start == Coord{1, 1, 0});
    REQUIRE(spec.graph.accept_cell.has_value());
    CHECK(*spec.graph.accept_cell == spec.graph.start);
    CHECK(spec.graph.segments().empty());
}

TEST_CASE("branching example lowers to the documented waypoints") {
    // at line 32 with register 1 zero: bump register 2, jump to line 23;
    // the path passes (r, 32, lane 0) -> (r2+1, 32, lane 32) -> (r2+1, 23,
    // lane 32) -> (r2+1, 23, lane 0), coordinates (r1, r2, head, pc, lane)
    cm::Program p = cm::load_program_file(data_path("paper_example.cm"));
    ForceFieldSpec spec = compile(p, "", GrooveOptions{});
    const std::vector<Coord> expected = {
        {0, 0, 1, 32, 0}, {0, 1, 1, 32, 32}, {0, 1, 1, 23, 32}, {0, 1, 1, 23, 0}};
    const auto& wp = spec.graph.waypoints;
    size_t at = 0;
    for (const Coord& want : expected) {
        while (at < wp.size() && wp[at] != want) ++at;
        REQUIRE_MESSAGE(at < wp.size(), "waypoint missing from the compiled path");
        ++at;
    }
    REQUIRE(spec.graph.accept_cell.has_value());
    CHECK(*spec.graph.accept_cell == Coord{0, 1, 1, 23, 0});
}

TEST_CASE("path segments are unit lattice steps and the path is self-avoiding") {
    cm::Program p = cm::load_program_file(data_path("anbn.cm"));
    ForceFieldSpec spec = compile(p, "aabb", GrooveOptions{});
    std::set<Coord> seen;
    for (const Coord& w : spec.graph.waypoints) CHECK(seen.insert(w).second);
    for (const PathSegment& s : spec.graph.segments()) {
        int changed = 0;
        for (int d = 0; d < spec.graph.dim; ++d)
            if (s.a[d] != s.b[d]) {
                ++changed;
                CHECK(std::abs(s.b[d] - s.a[d]) == 1);
                CHECK(d == s.axis);
            }
        CHECK(changed == 1);
    }
}

TEST_CASE("out-degree is at most one at every cell") {
    cm::Program p = cm::load_program_file(data_path("parity.cm"));
    ForceFieldSpec spec = compile(p, "aaaa", GrooveOptions{});
    std::map<Coord, Coord> out_edge;
    for (const PathSegment& s : spec.graph.segments()) {
        auto [it, fresh] = out_edge.emplace(s.a, s.b);
        CHECK(fresh); // a second outgoing edge would contradict determinism
    }
}

TEST_CASE("path-trace equivalence: the groove visits exactly the interpreter states") {
    for (const char* prog_name : {"anbn.cm", "parity.cm"}) {
        cm::Program p = cm::load_program_file(data_path(prog_name));
        for (const std::string& w : words_up_to(p.alphabet, 5)) {
            cm::ExecResult oracle = cm::run(p, w, 200, true);
            if (oracle.verdict == cm::Verdict::step_limit) continue;
            ForceFieldSpec spec = compile(p, w, GrooveOptions{});
            std::vector<Coord> expected;
            for (const cm::MachineState& s : oracle.trace)
                expected.push_back(state_to_cell(s, p.register_count));
            CHECK(spec.graph.state_cells() == expected);
            // terminal verdict mirrors the interpreter
            CHECK((spec.graph.terminal_verdict() == cm::Verdict::accept) ==
                  (oracle.verdict == cm::Verdict::accept));
        }
    }
}

TEST_CASE("compile rejects a non-halting execution") {
    const char* src = "1: CASE * * -> (0) HEAD 0 JUMP 1\n"; // spins forever
    cm::Program p = cm::parse_program(src);
    GrooveOptions opts;
    opts.step_limit = 1000;
    CHECK_THROWS_AS(compile(p, "", opts), CompileError);
}

TEST_CASE("json round trip reproduces identical geometry") {
    cm::Program p = cm::load_program_file(data_path("anbn.cm"));
    ForceFieldSpec spec = compile(p, "ab", GrooveOptions{});
    const std::string text = to_json(spec);
    ForceFieldSpec back = from_json(text);
    CHECK(back.graph.waypoints == spec.graph.waypoints);
    CHECK(back.cell_size == spec.cell_size);

    Field f1(spec), f2(back);
    Vec x{};
    x[0] = 1.25;
    x[1] = -0.5;
    x[2] = 5.75;
    x[3] = 6.2;
    x[4] = 0.4;
    const Vec a = f1.force(x);
    const Vec b = f2.force(x);
    for (int d = 0; d < f1.dim(); ++d) CHECK(a[d] == b[d]); // bit-identical
}

TEST_CASE("force field save/load via files") {
    namespace fs = std::filesystem;
    cm::Program p = cm::load_program_file(data_path("parity.cm"));
    ForceFieldSpec spec = compile(p, "aa", GrooveOptions{});
    const auto tmp = fs::temp_directory_path() / "difflab_groove_roundtrip.json";
    save_force_field(spec, tmp.string());
    ForceFieldSpec back = load_force_field(tmp.string());
    CHECK(back.graph.waypoints == spec.graph.waypoints);
    fs::remove(tmp);
}
