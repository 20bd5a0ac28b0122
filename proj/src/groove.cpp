#include "difflab/groove.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace difflab::groove {

namespace {

struct CoordHash {
    size_t operator()(const Coord& c) const {
        size_t h = 0x9e3779b97f4a7c15ULL;
        for (int32_t v : c) h = h * 0x100000001b3ULL ^ static_cast<uint32_t>(v);
        return h;
    }
};

std::string coord_str(const Coord& c) {
    std::string s = "(";
    for (size_t i = 0; i < c.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(c[i]);
    }
    return s + ")";
}

} // namespace

std::vector<PathSegment> GrooveGraph::segments() const {
    std::vector<PathSegment> out;
    for (size_t i = 0; i + 1 < waypoints.size(); ++i) {
        PathSegment seg;
        seg.a = waypoints[i];
        seg.b = waypoints[i + 1];
        for (int d = 0; d < dim; ++d) {
            if (seg.a[d] != seg.b[d]) {
                seg.axis = d;
                seg.dir = seg.b[d] > seg.a[d] ? 1 : -1;
            }
        }
        out.push_back(std::move(seg));
    }
    return out;
}

std::vector<Coord> GrooveGraph::state_cells() const {
    std::vector<Coord> out;
    const int lane = dim - 1;
    for (const Coord& w : waypoints)
        if (w[lane] == 0) out.push_back(w);
    return out;
}

const Coord& GrooveGraph::terminal() const {
    if (accept_cell) return *accept_cell;
    if (reject_cell) return *reject_cell;
    throw std::logic_error("groove graph has no terminal cell");
}

cm::Verdict GrooveGraph::terminal_verdict() const {
    return accept_cell ? cm::Verdict::accept : cm::Verdict::reject;
}

void ForceFieldSpec::validate() const {
    if (cell_size <= 0.0) throw CompileError("cell size must be positive");
    if (!(corridor_radius > 0.0 && corridor_radius < cell_size / 2.0))
        throw CompileError("corridor radius must satisfy 0 < r < L/2");
    if (!(smoothing_radius > 0.0 && smoothing_radius <= corridor_radius))
        throw CompileError("smoothing radius must satisfy 0 < s <= r");
    if (kappa <= 0.0) throw CompileError("confinement stiffness must be positive");
    if (speed <= 0.0) throw CompileError("tangential speed must be positive");
    if (graph.dim != graph.register_count + 3 || graph.dim > kMaxDim)
        throw CompileError("bad groove dimension");
}

Coord state_to_cell(const cm::MachineState& s, int register_count) {
    Coord c(register_count + 3, 0);
    for (int i = 0; i < register_count; ++i) c[i] = static_cast<int32_t>(s.registers[i]);
    c[register_count] = s.head_pos;
    c[register_count + 1] = s.pc;
    c[register_count + 2] = 0;
    return c;
}

ForceFieldSpec compile(const cm::Program& p, const std::string& input, const GrooveOptions& opts) {
    const int k = p.register_count;
    const int dim = k + 3;
    if (dim > kMaxDim)
        throw CompileError("too many registers for the simulator (dimension " +
                           std::to_string(dim) + " exceeds " + std::to_string(kMaxDim) + ")");

    cm::ExecResult res = cm::run(p, input, opts.step_limit, /*record_trace=*/true,
                                 /*trace_cap=*/1u << 22);
    if (res.verdict == cm::Verdict::step_limit)
        throw CompileError("program did not halt within " + std::to_string(opts.step_limit) +
                           " steps; cannot lower a non-halting execution");
    const auto& trace = res.trace;

    const int head_axis = k;
    const int pc_axis = k + 1;
    const int lane_axis = k + 2;

    GrooveGraph g;
    g.dim = dim;
    g.register_count = k;
    g.start = state_to_cell(trace.front(), k);
    g.waypoints.push_back(g.start);

    std::unordered_map<Coord, size_t, CoordHash> seen;
    seen.emplace(g.start, 0);

    Coord cur = g.start;
    auto walk_to = [&](int axis, int32_t target) {
        while (cur[axis] != target) {
            cur[axis] += target > cur[axis] ? 1 : -1;
            auto [it, fresh] = seen.emplace(cur, g.waypoints.size());
            if (!fresh)
                throw CompileError(
                    "groove collision: cell " + coord_str(cur) +
                    " is used by two different transits; the program's branch "
                    "semantics cannot be realized on this lattice");
            g.waypoints.push_back(cur);
        }
    };

    int sign = 1;
    for (size_t t = 0; t + 1 < trace.size(); ++t) {
        const cm::MachineState& a = trace[t];
        const cm::MachineState& b = trace[t + 1];
        const int32_t lane_level = static_cast<int32_t>(sign * a.pc);
        walk_to(lane_axis, lane_level);
        for (int i = 0; i < k; ++i) walk_to(i, static_cast<int32_t>(b.registers[i]));
        walk_to(head_axis, b.head_pos);
        walk_to(pc_axis, b.pc);
        walk_to(lane_axis, 0);
        sign = -sign;
    }

    const Coord term = state_to_cell(trace.back(), k);
    if (cur != term)
        throw std::logic_error("groove path did not end at the terminal state cell");
    if (res.verdict == cm::Verdict::accept)
        g.accept_cell = term;
    else
        g.reject_cell = term;

    ForceFieldSpec spec;
    spec.graph = std::move(g);
    spec.cell_size = opts.cell_size;
    spec.corridor_radius = opts.corridor_ratio * opts.cell_size;
    spec.smoothing_radius = opts.smoothing_ratio * opts.cell_size;
    spec.kappa = opts.kappa;
    spec.speed = opts.speed;
    spec.validate();
    return spec;
}

std::string to_json(const ForceFieldSpec& spec) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["dim"] = spec.graph.dim;
    j["register_count"] = spec.graph.register_count;
    j["cell_size"] = spec.cell_size;
    j["corridor_radius"] = spec.corridor_radius;
    j["smoothing_radius"] = spec.smoothing_radius;
    j["kappa"] = spec.kappa;
    j["speed"] = spec.speed;
    j["start"] = spec.graph.start;
    if (spec.graph.accept_cell) j["accept"] = *spec.graph.accept_cell;
    else j["accept"] = nullptr;
    if (spec.graph.reject_cell) j["reject"] = *spec.graph.reject_cell;
    else j["reject"] = nullptr;
    auto segs = nlohmann::json::array();
    for (const PathSegment& s : spec.graph.segments()) segs.push_back({s.a, s.b});
    j["segments"] = segs;
    return j.dump(2);
}

ForceFieldSpec from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ForceFieldSpec spec;
    spec.graph.dim = j.at("dim").get<int>();
    spec.graph.register_count = j.at("register_count").get<int>();
    spec.cell_size = j.at("cell_size").get<double>();
    spec.corridor_radius = j.at("corridor_radius").get<double>();
    spec.smoothing_radius = j.at("smoothing_radius").get<double>();
    spec.kappa = j.at("kappa").get<double>();
    spec.speed = j.at("speed").get<double>();
    spec.graph.start = j.at("start").get<Coord>();
    if (!j.at("accept").is_null()) spec.graph.accept_cell = j["accept"].get<Coord>();
    if (!j.at("reject").is_null()) spec.graph.reject_cell = j["reject"].get<Coord>();

    spec.graph.waypoints.clear();
    spec.graph.waypoints.push_back(spec.graph.start);
    for (const auto& seg : j.at("segments")) {
        Coord a = seg.at(0).get<Coord>();
        Coord b = seg.at(1).get<Coord>();
        if (a != spec.graph.waypoints.back())
            throw CompileError("segment list does not form a chain");
        int changed = 0;
        for (size_t d = 0; d < a.size(); ++d)
            if (a[d] != b[d]) {
                ++changed;
                if (std::abs(b[d] - a[d]) != 1)
                    throw CompileError("segment is not a unit lattice step");
            }
        if (changed != 1) throw CompileError("segment changes more than one coordinate");
        spec.graph.waypoints.push_back(std::move(b));
    }
    if (spec.graph.waypoints.back() != spec.graph.terminal())
        throw CompileError("segment chain does not end at the terminal cell");
    spec.validate();
    return spec;
}

void save_force_field(const ForceFieldSpec& spec, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write force field file: " + path);
    f << to_json(spec) << "\n";
}

ForceFieldSpec load_force_field(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open force field file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

} // namespace difflab::groove
