#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace p2pgrid {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;
using PhaseSet = std::array<bool, 3>;
using Vec3i = std::array<int, 3>;

constexpr const char* kPhaseNames = "abc";

int phase_index(char c);
std::string phase_string(const PhaseSet& ph);
PhaseSet parse_phases(const std::string& s);

struct FeederError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-unit bases. base_kva is per phase, base_kv is line-to-line.
struct Bases {
    double kva = 1000.0;
    double kv = 4.16;

    double z_base() const;  // ohm
    double i_base() const;  // A
    void check() const;
};

double power_to_pu(double kw, const Bases& b);
double power_from_pu(double pu, const Bases& b);
double impedance_to_pu(double ohm, const Bases& b);
double impedance_from_pu(double pu, const Bases& b);
double current_to_pu(double amps, const Bases& b);
double current_from_pu(double pu, const Bases& b);

struct Node {
    int id = 0;
    std::string name;
    PhaseSet phases{false, false, false};
};

struct Line {
    std::string id;
    int from = 0;  // node index, oriented away from the substation
    int to = 0;
    std::string name;
    Mat3 R{};  // pu
    Mat3 X{};  // pu
    double s_limit = 0.0;  // pu per phase
    double i_min = 0.0;    // pu
    double i_max = 0.0;    // pu
    bool in_service = true;
    PhaseSet phases{false, false, false};
};

struct NodeLoad {
    Vec3 P{};  // pu
    Vec3 Q{};  // pu
};

struct VoltageBounds {
    double v_min = 0.95;
    double v_max = 1.05;
};

struct Network {
    std::string name;
    std::vector<Node> nodes;
    std::vector<Line> lines;
    std::vector<NodeLoad> loads;   // indexed like nodes
    std::vector<Vec3> shunt_q;     // constant reactive injection, pu
    int substation = 0;            // node index
    Bases bases;
    VoltageBounds vbounds;

    int node_index(int id) const;  // throws FeederError
    int line_index(const std::string& id) const;
};

struct Topology {
    std::vector<int> parent_line;                // -1 for roots
    std::vector<std::vector<int>> child_lines;   // in-service only
    std::vector<int> island;                     // component id; substation component is 0
    std::vector<int> order;                      // parents before children
};

Network load_feeder(const std::string& path);
Network parse_feeder(const std::string& json_text);

// radial, connected, physically sane; throws FeederError naming the element
void validate(const Network& net);

// in-service lines only; islands permitted
Topology downstream_sets(const Network& net);

// nodes with no in-service path to the substation
std::vector<int> islanded_nodes(const Network& net);

}  // namespace p2pgrid
