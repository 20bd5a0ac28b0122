#include "difflab/circuit.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace difflab::circuit {

namespace {
int theta(double u) { return u >= 0.0 ? 1 : 0; }
} // namespace

int Circuit::eval(const std::vector<int>& input) const {
    validate();
    if (static_cast<int>(input.size()) != input_arity)
        throw std::invalid_argument("input arity mismatch: expected " +
                                    std::to_string(input_arity) + ", got " +
                                    std::to_string(input.size()));
    std::vector<int> prev(input);
    std::vector<int> cur;
    for (const auto& layer : layers) {
        cur.clear();
        for (const ThresholdGate& g : layer) {
            double u = g.offset;
            for (size_t i = 0; i < g.weights.size(); ++i) u += g.weights[i] * prev[i];
            cur.push_back(theta(u));
        }
        prev = cur;
    }
    return prev.at(0);
}

void Circuit::validate() const {
    if (layers.empty()) throw std::invalid_argument("circuit has no layers");
    size_t fan_in = input_arity;
    for (const auto& layer : layers) {
        if (layer.empty()) throw std::invalid_argument("empty circuit layer");
        for (const ThresholdGate& g : layer)
            if (g.weights.size() != fan_in)
                throw std::invalid_argument("gate weight count does not match fan-in");
        fan_in = layer.size();
    }
    if (layers.back().size() != 1)
        throw std::invalid_argument("output layer must hold exactly one gate");
}

int Circuit::declared_width() const {
    size_t w = 0;
    for (const auto& layer : layers) w = std::max(w, layer.size());
    return static_cast<int>(w);
}

int Circuit::audit_depth() const {
    validate();
    // chain[l][g]: longest gate chain through nonzero weights ending at gate g
    std::vector<std::vector<int>> chain(layers.size());
    for (size_t l = 0; l < layers.size(); ++l) {
        chain[l].resize(layers[l].size(), 1);
        if (l == 0) continue;
        for (size_t g = 0; g < layers[l].size(); ++g) {
            int best = 0;
            const auto& w = layers[l][g].weights;
            for (size_t i = 0; i < w.size(); ++i)
                if (w[i] != 0.0) best = std::max(best, chain[l - 1][i]);
            chain[l][g] = best + 1;
        }
    }
    return chain.back().at(0);
}

int Circuit::audit_width() const {
    validate();
    // mark gates that reach the output through nonzero weights
    std::vector<std::vector<char>> used(layers.size());
    for (size_t l = 0; l < layers.size(); ++l) used[l].assign(layers[l].size(), 0);
    used.back()[0] = 1;
    for (size_t l = layers.size(); l-- > 1;) {
        for (size_t g = 0; g < layers[l].size(); ++g) {
            if (!used[l][g]) continue;
            const auto& w = layers[l][g].weights;
            for (size_t i = 0; i < w.size(); ++i)
                if (w[i] != 0.0) used[l - 1][i] = 1;
        }
    }
    int width = 0;
    for (const auto& lv : used)
        width = std::max(width, static_cast<int>(std::count(lv.begin(), lv.end(), 1)));
    return width;
}

Circuit and_gate(int n) {
    if (n < 1) throw std::invalid_argument("AND needs arity >= 1");
    Circuit c;
    c.input_arity = n;
    c.layers = {{ThresholdGate{std::vector<double>(n, 1.0), -static_cast<double>(n)}}};
    return c;
}

Circuit or_gate(int n) {
    if (n < 1) throw std::invalid_argument("OR needs arity >= 1");
    Circuit c;
    c.input_arity = n;
    c.layers = {{ThresholdGate{std::vector<double>(n, 1.0), -1.0}}};
    return c;
}

Circuit not_gate() {
    Circuit c;
    c.input_arity = 1;
    c.layers = {{ThresholdGate{{-1.0}, 0.0}}};
    return c;
}

Circuit k_equals(int n, int k) {
    if (n < 1) throw std::invalid_argument("k-EQUALS needs arity >= 1");
    if (k < 0 || k > n)
        throw std::invalid_argument("k-EQUALS needs 0 <= k <= n, got k = " + std::to_string(k));
    Circuit c;
    c.input_arity = n;
    const ThresholdGate ge{std::vector<double>(n, 1.0), -static_cast<double>(k)};
    const ThresholdGate le{std::vector<double>(n, -1.0), static_cast<double>(k)};
    c.layers.push_back({ge, le});
    c.layers.push_back({ThresholdGate{{1.0, 1.0}, -2.0}});
    return c;
}

Circuit is_in(int n, const std::set<int>& members) {
    if (n < 1) throw std::invalid_argument("IS-IN needs arity >= 1");
    for (int k : members)
        if (k < 0 || k > n)
            throw std::invalid_argument("IS-IN member out of range: " + std::to_string(k));
    Circuit c;
    c.input_arity = n;
    if (members.empty()) {
        // constant 0, padded to the nominal three layers
        c.layers.push_back({ThresholdGate{std::vector<double>(n, 0.0), -1.0}});
        c.layers.push_back({ThresholdGate{{1.0}, -1.0}});
        c.layers.push_back({ThresholdGate{{1.0}, -1.0}});
        return c;
    }
    std::vector<ThresholdGate> layer1;
    std::vector<ThresholdGate> layer2;
    int idx = 0;
    for (int k : members) {
        layer1.push_back(ThresholdGate{std::vector<double>(n, 1.0), -static_cast<double>(k)});
        layer1.push_back(ThresholdGate{std::vector<double>(n, -1.0), static_cast<double>(k)});
        std::vector<double> w(2 * members.size(), 0.0);
        w[2 * idx] = 1.0;
        w[2 * idx + 1] = 1.0;
        layer2.push_back(ThresholdGate{std::move(w), -2.0});
        ++idx;
    }
    c.layers.push_back(std::move(layer1));
    c.layers.push_back(std::move(layer2));
    c.layers.push_back({ThresholdGate{std::vector<double>(members.size(), 1.0), -1.0}});
    return c;
}

std::string to_json(const Circuit& c) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["input_arity"] = c.input_arity;
    auto layers = nlohmann::json::array();
    for (const auto& layer : c.layers) {
        auto lj = nlohmann::json::array();
        for (const ThresholdGate& g : layer)
            lj.push_back({{"weights", g.weights}, {"offset", g.offset}});
        layers.push_back(lj);
    }
    j["layers"] = layers;
    return j.dump(2);
}

Circuit circuit_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Circuit c;
    c.input_arity = j.at("input_arity").get<int>();
    for (const auto& lj : j.at("layers")) {
        std::vector<ThresholdGate> layer;
        for (const auto& gj : lj)
            layer.push_back(ThresholdGate{gj.at("weights").get<std::vector<double>>(),
                                          gj.at("offset").get<double>()});
        c.layers.push_back(std::move(layer));
    }
    c.validate();
    return c;
}

void save_circuit(const Circuit& c, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write circuit file: " + path);
    f << to_json(c) << "\n";
}

Circuit load_circuit(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open circuit file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return circuit_from_json(ss.str());
}

} // namespace difflab::circuit
