#pragma once

// Independent oracles and invariant checks shared by the unit tests and the
// acceptance binary. Nothing here reuses the model's own assembly logic
// beyond reading its variable indices.

#include <complex>
#include <string>
#include <vector>

#include "p2pgrid/settlement.hpp"

namespace p2pgrid::testing {

std::string source_path(const std::string& rel);

struct Solved {
    Model model;
    conic::Solution sol;
    DLMPSurface dlmp;
};

Solved solve_spec(const ScenarioSpec& spec, const conic::SolverOptions& opts = {});
Solved solve_file(const std::string& rel_path);

// Two-bus Newton-Raphson in polar form. Bus 1 is the slack at |V1|; bus 2
// draws (P, Q) through impedance r + jx.
struct TwoBusFlow {
    std::complex<double> v2;
    double p_send = 0.0;  // into the line at bus 1
    double q_send = 0.0;
    double i_sq = 0.0;    // |I|^2
    int iterations = 0;
};
TwoBusFlow newton_two_bus(double v1, double r, double x, double p_load, double q_load);

// Dispatch of the two-prosumer, one-line instance by nested golden-section
// search over the remote prosumer's (P, Q), each point evaluated by
// newton_two_bus. The local prosumer covers the rest of the trade; the
// substation covers losses.
struct TwoNodeDispatch {
    double p_remote = 0.0, q_remote = 0.0;
    double p_local = 0.0;
    double pug = 0.0;
    double fp = 0.0, fq = 0.0, a = 0.0, v2 = 0.0;
    double objective = 0.0;  // $
};
TwoNodeDispatch two_node_oracle(const ScenarioSpec& spec);

// The same quantities read out of a model solution.
TwoNodeDispatch two_node_from_model(const Solved& s);

// Objective change per unit of extra active demand at (node, phase), reactive
// demand held fixed, in $/MWh. Consumer demand is moved when a consumer sits
// there, otherwise a small consumer is added. Central difference where the
// load can move both ways.
double fd_dlmp(const ScenarioSpec& attacked, int node, int phase, double delta = 1e-4);

// Breadth-first parent map from the substation over in-service lines,
// built straight from the line list.
std::vector<int> bfs_parent_nodes(const Network& net);

struct Invariants {
    double balance = 0.0;     // max |residual| over nodal balance rows, pu
    double vdrop = 0.0;       // pu^2
    double voltage = 0.0;     // max bound violation, pu^2
    double inverter = 0.0;    // max S - |P + jQ| violation, pu
    double trade = 0.0;       // max |residual| over sell/buy rows, pu
    double cones = 0.0;       // max violation over all cones
    double soc_max_gap = 0.0;
};
Invariants check_invariants(const Solved& s);

// CSV bodies concatenated, for byte comparisons.
std::string render_tables(const Solved& s);

}  // namespace p2pgrid::testing
