#pragma once

#include "difflab/counter_machine.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Lowers a (program, input word) pair to groove geometry on the integer
// lattice of R^(k+3). Coordinates are ordered (r_1..r_k, head, pc, lane).
// A machine state (r, h, i) lives at cell (r, h, i, 0). Executing the
// instruction at that state draws a path that
//   (a) raises the jump lane to +/-i,
//   (b) applies the register deltas as unit axis steps,
//   (c) applies the head move,
//   (d) walks the pc axis to the jump target at that lane level, and
//   (e) returns the lane to 0, arriving at the successor's state cell.
// The lane excursion sign alternates with the arrival direction so that the
// return run of one instruction and the raise run of the next form a single
// straight line through the state cell instead of doubling back on itself.
// HALT instructions terminate the path at their state cell.
//
// Because the input word is fixed at compile time and the machine is
// deterministic, the reachable configurations form a single halting
// execution; the groove is that execution's path and must be self-avoiding.
// Any revisited lattice cell means the geometry cannot represent the
// transition relation and compilation fails.

namespace difflab::groove {

constexpr int kMaxDim = 12;

using Coord = std::vector<int32_t>;

struct CompileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PathSegment {
    Coord a;
    Coord b;
    int axis = 0; // coordinate that changes
    int dir = 0;  // +1 or -1
};

struct GrooveGraph {
    int dim = 0;            // k + 3
    int register_count = 0; // k
    std::vector<Coord> waypoints; // unit-step chain from START to the terminal
    Coord start;
    std::optional<Coord> accept_cell;
    std::optional<Coord> reject_cell;

    std::vector<PathSegment> segments() const;
    // Waypoints with lane coordinate 0, in path order; these are exactly the
    // embedded machine states (r, h, pc).
    std::vector<Coord> state_cells() const;
    const Coord& terminal() const;
    cm::Verdict terminal_verdict() const;
};

struct GrooveOptions {
    double cell_size = 6.0;        // L
    double corridor_ratio = 0.25;  // r = corridor_ratio * L
    double smoothing_ratio = 0.125; // s = smoothing_ratio * L, also fillet radius
    double kappa = 16.0;           // confinement stiffness
    double speed = 1.0;            // tangential speed v
    int64_t step_limit = 200000;   // interpreter bound during lowering
};

struct ForceFieldSpec {
    GrooveGraph graph;
    double cell_size = 0.0;
    double corridor_radius = 0.0;
    double smoothing_radius = 0.0;
    double kappa = 0.0;
    double speed = 0.0;

    void validate() const;
};

Coord state_to_cell(const cm::MachineState& s, int register_count);

// Runs the interpreter (it must halt within opts.step_limit) and emits the
// groove realizing the observed execution.
ForceFieldSpec compile(const cm::Program& p, const std::string& input,
                       const GrooveOptions& opts = {});

std::string to_json(const ForceFieldSpec& spec);
ForceFieldSpec from_json(const std::string& text);
void save_force_field(const ForceFieldSpec& spec, const std::string& path);
ForceFieldSpec load_force_field(const std::string& path);

} // namespace difflab::groove
