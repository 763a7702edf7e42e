#pragma once

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "p2pgrid/model.hpp"

namespace p2pgrid {

struct SettlementError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConsumerLine {
    std::string id;
    int node = 0;  // index
    int node_id = 0;
    double reported_mwh = 0.0;
    double true_mwh = 0.0;
    double cleared_mwh = 0.0;  // reported minus curtailed
    double curtailed_mwh = 0.0;
    double bill = 0.0;  // $
};

struct ProsumerLine {
    std::string id;
    int node = 0;  // index
    int node_id = 0;
    double sold_mwh = 0.0;
    double revenue = 0.0;  // $
    double offer = 0.0;
};

struct NodePhaseValue {
    int node = 0;
    int phase = 0;
    int t = 0;
    double value = 0.0;
};

struct TradeLine {
    std::string prosumer;
    std::string consumer;
    int phase = 0;
    int t = 0;
    double mwh = 0.0;
};

struct SettlementReport {
    std::string scenario;
    conic::Status status = conic::Status::numerical_failure;
    double objective = 0.0;          // $, solver objective
    double p2p_cost = 0.0;           // $, offers minus utility
    double grid_cost = 0.0;          // $, substation energy plus lost load
    double total_cost = 0.0;         // $, p2p_cost + grid_cost
    double substation_mwh = 0.0;
    double substation_payment = 0.0; // $
    double lost_load_cost = 0.0;     // $
    double total_bills = 0.0;
    double total_revenue = 0.0;
    double surplus = 0.0;            // bills - revenue - substation payment
    double curtailment_mw = 0.0;     // average over the horizon
    std::vector<ConsumerLine> consumers;
    std::vector<ProsumerLine> prosumers;
    std::vector<NodePhaseValue> curtailment;  // MW
    std::vector<NodePhaseValue> voltage;      // pu magnitude
    std::vector<TradeLine> trades;
    DLMPSurface dlmp;
    SocReport soc;
    conic::SolverStats stats;
};

SettlementReport compute_settlement(const Model& m, const conic::Solution& sol, const DLMPSurface& dlmp);

struct AgentDelta {
    std::string id;
    std::string kind;  // consumer or prosumer
    double pre = 0.0;
    double post = 0.0;
    double delta = 0.0;
};

struct NodePhaseDelta {
    int node_id = 0;
    int phase = 0;
    int t = 0;
    double pre = 0.0;
    double post = 0.0;
    double delta = 0.0;
};

struct CompareReport {
    std::string pre_name;
    std::string post_name;
    double pre_cost = 0.0;
    double post_cost = 0.0;
    double cost_ratio = 0.0;
    double delta_curtailment_mw = 0.0;
    std::vector<AgentDelta> agents;  // bills then revenues
    std::vector<NodePhaseDelta> dlmp, voltage, curtailment;
};

// Node ids are used rather than indices since the two reports may come from
// different networks (an outage keeps the node set).
CompareReport compare(const SettlementReport& pre, const SettlementReport& post, const Network& net);

// Long-format CSV tables; fixed precision so repeated runs are byte-identical.
void write_bills_csv(std::ostream& os, const SettlementReport& r);
void write_dlmp_csv(std::ostream& os, const SettlementReport& r, const Network& net);
void write_voltage_csv(std::ostream& os, const SettlementReport& r, const Network& net);
void write_trades_csv(std::ostream& os, const SettlementReport& r);
void write_compare_agents_csv(std::ostream& os, const CompareReport& c);
void write_compare_nodes_csv(std::ostream& os, const CompareReport& c);

// JSON text; `generated_at` is the only run-dependent field.
std::string report_json(const SettlementReport& r, const Network& net, const std::string& generated_at);
std::string compare_json(const CompareReport& c, const std::string& generated_at);

// Writes report.json and the four CSVs into dir.
void write_report(const std::string& dir, const SettlementReport& r, const Network& net,
                  const std::string& generated_at);
void write_compare(const std::string& dir, const CompareReport& c, const std::string& generated_at);

}  // namespace p2pgrid
