#include "p2pgrid/feeder.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <queue>
#include <sstream>

namespace p2pgrid {

using json = nlohmann::json;

int phase_index(char c) {
    switch (c) {
        case 'a': case 'A': return 0;
        case 'b': case 'B': return 1;
        case 'c': case 'C': return 2;
    }
    throw FeederError(std::string("unknown phase '") + c + "'");
}

std::string phase_string(const PhaseSet& ph) {
    std::string s;
    for (int k = 0; k < 3; ++k)
        if (ph[k]) s += kPhaseNames[k];
    return s;
}

PhaseSet parse_phases(const std::string& s) {
    PhaseSet ph{false, false, false};
    for (char c : s) ph[phase_index(c)] = true;
    return ph;
}

double Bases::z_base() const {
    double v = kv / std::sqrt(3.0);
    return v * v * 1000.0 / kva;
}

double Bases::i_base() const { return kva / (kv / std::sqrt(3.0)); }

void Bases::check() const {
    if (!(kva > 0)) throw FeederError("base_kva must be positive");
    if (!(kv > 0)) throw FeederError("base_kv must be positive");
}

double power_to_pu(double kw, const Bases& b) { b.check(); return kw / b.kva; }
double power_from_pu(double pu, const Bases& b) { b.check(); return pu * b.kva; }
double impedance_to_pu(double ohm, const Bases& b) { b.check(); return ohm / b.z_base(); }
double impedance_from_pu(double pu, const Bases& b) { b.check(); return pu * b.z_base(); }
double current_to_pu(double amps, const Bases& b) { b.check(); return amps / b.i_base(); }
double current_from_pu(double pu, const Bases& b) { b.check(); return pu * b.i_base(); }

int Network::node_index(int id) const {
    for (size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == id) return static_cast<int>(i);
    throw FeederError("unknown node " + std::to_string(id));
}

int Network::line_index(const std::string& id) const {
    for (size_t i = 0; i < lines.size(); ++i)
        if (lines[i].id == id) return static_cast<int>(i);
    throw FeederError("unknown line " + id);
}

namespace {

Mat3 read_mat(const json& j, const std::string& what) {
    Mat3 m{};
    if (!j.is_array() || j.size() != 3) throw FeederError(what + ": expected 3x3 matrix");
    for (int r = 0; r < 3; ++r) {
        if (!j[r].is_array() || j[r].size() != 3) throw FeederError(what + ": expected 3x3 matrix");
        for (int c = 0; c < 3; ++c) m[r][c] = j[r][c].get<double>();
    }
    return m;
}

std::string line_name(const Network& net, const Line& l) {
    return l.id.empty() ? std::to_string(net.nodes[l.from].id) + "-" + std::to_string(net.nodes[l.to].id) : l.id;
}

// path between a and b in the forest given by adjacency, as node ids
std::vector<int> forest_path(const std::vector<std::vector<int>>& adj, int a, int b) {
    std::vector<int> prev(adj.size(), -2);
    std::queue<int> q;
    q.push(a);
    prev[a] = -1;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        if (u == b) break;
        for (int v : adj[u])
            if (prev[v] == -2) {
                prev[v] = u;
                q.push(v);
            }
    }
    std::vector<int> path;
    for (int u = b; u != -1 && u >= 0; u = prev[u]) path.push_back(u);
    return path;
}

void orient(Network& net) {
    int n = static_cast<int>(net.nodes.size());
    std::vector<std::vector<int>> inc(n);
    for (size_t i = 0; i < net.lines.size(); ++i) {
        inc[net.lines[i].from].push_back(static_cast<int>(i));
        inc[net.lines[i].to].push_back(static_cast<int>(i));
    }
    std::vector<bool> seen(n, false);
    std::queue<int> q;
    q.push(net.substation);
    seen[net.substation] = true;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int li : inc[u]) {
            Line& l = net.lines[li];
            int other = l.from == u ? l.to : l.from;
            if (seen[other]) continue;
            if (l.from != u) std::swap(l.from, l.to);
            seen[other] = true;
            q.push(other);
        }
    }
}

}  // namespace

Network parse_feeder(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FeederError(std::string("feeder parse error: ") + e.what());
    }
    Network net;
    try {
        net.name = j.value("name", "");
        net.bases.kva = j.at("base_kva").get<double>();
        net.bases.kv = j.at("base_kv").get<double>();
        net.bases.check();
        net.vbounds.v_min = j.value("v_min", 0.95);
        net.vbounds.v_max = j.value("v_max", 1.05);

        std::map<int, int> idx;
        for (const auto& jn : j.at("nodes")) {
            Node nd;
            nd.id = jn.at("id").get<int>();
            nd.name = jn.value("name", std::to_string(nd.id));
            if (!idx.emplace(nd.id, static_cast<int>(net.nodes.size())).second)
                throw FeederError("duplicate node " + std::to_string(nd.id));
            net.nodes.push_back(nd);
            NodeLoad ld;
            Vec3 sh{};
            if (jn.contains("loads"))
                for (auto it = jn["loads"].begin(); it != jn["loads"].end(); ++it) {
                    int k = phase_index(it.key().at(0));
                    ld.P[k] = power_to_pu(it.value().value("p", 0.0), net.bases);
                    ld.Q[k] = power_to_pu(it.value().value("q", 0.0), net.bases);
                }
            if (jn.contains("shunt_kvar"))
                for (auto it = jn["shunt_kvar"].begin(); it != jn["shunt_kvar"].end(); ++it)
                    sh[phase_index(it.key().at(0))] = power_to_pu(it.value().get<double>(), net.bases);
            net.loads.push_back(ld);
            net.shunt_q.push_back(sh);
        }
        auto node_of = [&](int id, const std::string& where) {
            auto it = idx.find(id);
            if (it == idx.end()) throw FeederError(where + " references unknown node " + std::to_string(id));
            return it->second;
        };
        net.substation = node_of(j.at("substation").get<int>(), "substation");

        for (const auto& jl : j.at("lines")) {
            Line l;
            int f = jl.at("from").get<int>(), t = jl.at("to").get<int>();
            l.id = jl.value("id", std::to_string(f) + "-" + std::to_string(t));
            l.name = jl.value("name", l.id);
            l.from = node_of(f, "line " + l.id);
            l.to = node_of(t, "line " + l.id);
            Mat3 R = read_mat(jl.at("R"), "line " + l.id + " R");
            Mat3 X = read_mat(jl.at("X"), "line " + l.id + " X");
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) {
                    l.R[r][c] = impedance_to_pu(R[r][c], net.bases);
                    l.X[r][c] = impedance_to_pu(X[r][c], net.bases);
                }
            if (jl.contains("phases")) {
                l.phases = parse_phases(jl["phases"].get<std::string>());
            } else {
                for (int k = 0; k < 3; ++k) l.phases[k] = R[k][k] != 0.0 || X[k][k] != 0.0;
            }
            l.s_limit = power_to_pu(jl.at("s_limit").get<double>(), net.bases);
            l.in_service = jl.value("in_service", true);
            double vmin = net.vbounds.v_min;
            l.i_min = jl.contains("i_min_a") ? current_to_pu(jl["i_min_a"].get<double>(), net.bases) : 0.0;
            l.i_max = jl.contains("i_max_a") ? current_to_pu(jl["i_max_a"].get<double>(), net.bases)
                                             : (vmin > 0 ? l.s_limit / vmin : 0.0);
            net.lines.push_back(l);
        }
    } catch (const json::exception& e) {
        throw FeederError(std::string("feeder schema error: ") + e.what());
    }

    for (const auto& l : net.lines)
        for (int k = 0; k < 3; ++k)
            if (l.phases[k]) {
                net.nodes[l.from].phases[k] = true;
                net.nodes[l.to].phases[k] = true;
            }
    if (net.lines.empty()) net.nodes[net.substation].phases = {true, true, true};

    validate(net);
    orient(net);
    return net;
}

Network load_feeder(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FeederError("cannot open feeder file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_feeder(ss.str());
}

void validate(const Network& net) {
    net.bases.check();
    const auto& vb = net.vbounds;
    if (!(vb.v_min > 0 && vb.v_min < vb.v_max)) throw FeederError("voltage bounds must satisfy 0 < v_min < v_max");
    int n = static_cast<int>(net.nodes.size());
    if (n == 0) throw FeederError("feeder has no nodes");
    if (net.substation < 0 || net.substation >= n) throw FeederError("substation is not a node");

    // cycles first so the message can name them
    std::vector<int> comp(n);
    for (int i = 0; i < n; ++i) comp[i] = i;
    std::function<int(int)> find = [&](int u) { return comp[u] == u ? u : comp[u] = find(comp[u]); };
    std::vector<std::vector<int>> adj(n);
    for (const auto& l : net.lines) {
        if (l.from == l.to) throw FeederError("line " + line_name(net, l) + " is a self-loop");
        int a = find(l.from), b = find(l.to);
        if (a == b) {
            auto path = forest_path(adj, l.from, l.to);
            std::string cyc;
            for (int u : path) cyc += std::to_string(net.nodes[u].id) + " -> ";
            cyc += std::to_string(net.nodes[l.from].id);
            throw FeederError("feeder is not radial: cycle " + cyc + " closed by line " + line_name(net, l));
        }
        comp[a] = b;
        adj[l.from].push_back(l.to);
        adj[l.to].push_back(l.from);
    }
    for (int i = 0; i < n; ++i)
        if (find(i) != find(net.substation))
            throw FeederError("node " + std::to_string(net.nodes[i].id) + " is not connected to the substation");
    if (static_cast<int>(net.lines.size()) != n - 1) throw FeederError("feeder is not radial: |lines| != |nodes| - 1");

    for (const auto& l : net.lines) {
        const std::string nm = line_name(net, l);
        for (int k = 0; k < 3; ++k)
            if (l.R[k][k] < 0 || l.X[k][k] < 0) throw FeederError("line " + nm + " has a negative impedance diagonal");
        if (!(l.s_limit > 0)) throw FeederError("line " + nm + " needs a positive s_limit");
        if (l.i_min < 0 || !(l.i_max > l.i_min)) throw FeederError("line " + nm + " has invalid current bounds");
        bool any = l.phases[0] || l.phases[1] || l.phases[2];
        if (!any) throw FeederError("line " + nm + " has no phases");
        for (int k = 0; k < 3; ++k)
            if (!l.phases[k])
                for (int m = 0; m < 3; ++m)
                    if (l.R[k][m] != 0 || l.R[m][k] != 0 || l.X[k][m] != 0 || l.X[m][k] != 0)
                        throw FeederError("line " + nm + " has impedance on missing phase " + kPhaseNames[k]);
    }
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) {
            const auto& ld = net.loads[i];
            std::string where = "node " + std::to_string(net.nodes[i].id) + " phase " + kPhaseNames[k];
            if (ld.P[k] < 0) throw FeederError(where + " has negative active load");
            if (!net.nodes[i].phases[k] && (ld.P[k] != 0 || ld.Q[k] != 0 || net.shunt_q[i][k] != 0))
                throw FeederError(where + " carries load but is not connected");
        }
}

Topology downstream_sets(const Network& net) {
    int n = static_cast<int>(net.nodes.size());
    Topology t;
    t.parent_line.assign(n, -1);
    t.child_lines.assign(n, {});
    t.island.assign(n, -1);
    for (size_t i = 0; i < net.lines.size(); ++i) {
        const Line& l = net.lines[i];
        if (!l.in_service) continue;
        t.parent_line[l.to] = static_cast<int>(i);
        t.child_lines[l.from].push_back(static_cast<int>(i));
    }
    // substation first, then remaining roots in node order
    std::vector<int> roots{net.substation};
    for (int i = 0; i < n; ++i)
        if (t.parent_line[i] < 0 && i != net.substation) roots.push_back(i);
    int comp = 0;
    for (int r : roots) {
        std::queue<int> q;
        q.push(r);
        t.island[r] = comp;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            t.order.push_back(u);
            for (int li : t.child_lines[u]) {
                int v = net.lines[li].to;
                t.island[v] = comp;
                q.push(v);
            }
        }
        ++comp;
    }
    return t;
}

std::vector<int> islanded_nodes(const Network& net) {
    Topology t = downstream_sets(net);
    std::vector<int> out;
    for (size_t i = 0; i < net.nodes.size(); ++i)
        if (t.island[i] != 0) out.push_back(static_cast<int>(i));
    return out;
}

}  // namespace p2pgrid
