#pragma once

#include <set>
#include <string>
#include <vector>

// Threshold-gate circuits. A gate computes theta(sum_i w_i x_i + t) with
// theta the binary step function; theta(0) = 1 (the >= convention, used
// consistently everywhere). Circuits are strictly layered: every gate reads
// the full previous layer (the inputs for layer 0), with zero weights for
// unused wires.

namespace difflab::circuit {

struct ThresholdGate {
    std::vector<double> weights;
    double offset = 0.0;
};

struct Circuit {
    int input_arity = 0;
    std::vector<std::vector<ThresholdGate>> layers; // last layer has one gate

    int eval(const std::vector<int>& input) const;
    void validate() const;

    int declared_depth() const { return static_cast<int>(layers.size()); }
    int declared_width() const;

    // Longest chain of gates linked by nonzero weights that ends at the
    // output gate; equals declared_depth() for the shipped constructors.
    int audit_depth() const;
    // Widest layer counting only gates that feed the output through nonzero
    // weights.
    int audit_width() const;
};

// single-layer gadgets
Circuit and_gate(int n);
Circuit or_gate(int n);
Circuit not_gate();

// depth 2: outputs 1 iff exactly k of the n inputs are 1 (the AND of the
// >=k and <=k gates is folded into the output threshold gate)
Circuit k_equals(int n, int k);

// depth 3: outputs 1 iff popcount(input) is in S (OR over k-EQUALS blocks)
Circuit is_in(int n, const std::set<int>& members);

std::string to_json(const Circuit& c);
Circuit circuit_from_json(const std::string& text);
void save_circuit(const Circuit& c, const std::string& path);
Circuit load_circuit(const std::string& path);

} // namespace difflab::circuit
