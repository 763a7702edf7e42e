#pragma once

#include <string>
#include <vector>

#include "p2pgrid/conic.hpp"
#include "p2pgrid/scenario.hpp"

namespace p2pgrid {

struct Model {
    ScenarioSpec scenario;
    conic::ConicProblem problem;
    MarketIndex market;
    GridIndex grid;
};

// Market block + grid block + combined objective. Pending attacks are
// applied first; the stored scenario is the attacked one.
Model assemble(const ScenarioSpec& scenario);

// Human-readable hint for an infeasible status.
std::string infeasibility_hint(const Model& m);

enum class PriceSource {
    consumer,  // sensitivity to that node's consumer demand
    market,    // load-free: a new consumer buying from the cheapest prosumer
    grid       // load outside the market, or no prosumer on the phase
};

const char* to_string(PriceSource s);

struct DlmpEntry {
    int node = 0;  // node index
    int phase = 0;
    int t = 0;
    double price = 0.0;     // $/MWh, active demand at fixed reactive demand
    double price_pf = 0.0;  // $/MWh, demand at constant power factor
    double lambda_p = 0.0;  // $/MWh, active nodal balance dual
    double lambda_q = 0.0;  // $/Mvarh, reactive nodal balance dual
    PriceSource source = PriceSource::grid;
};

struct DLMPSurface {
    std::vector<DlmpEntry> entries;

    const DlmpEntry* find(int node, int phase, int t = 0) const;
    double at(int node, int phase, int t = 0) const;  // throws when absent
    double min_price() const;
    double max_price() const;
};

DLMPSurface extract_dlmp(const conic::Solution& sol, const Model& m);

}  // namespace p2pgrid
