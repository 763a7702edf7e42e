#pragma once

#include <complex>
#include <vector>

#include "p2pgrid/conic.hpp"
#include "p2pgrid/feeder.hpp"
#include "p2pgrid/market.hpp"

namespace p2pgrid {

using CMat3 = std::array<std::array<std::complex<double>, 3>, 3>;

struct TildeImpedance {
    Mat3 R{};
    Mat3 X{};
    Mat3 Z{};
};

CMat3 alpha_matrix();
TildeImpedance compute_tilde(const Line& line);

enum class LossModel { full, diagonal };

struct GridOptions {
    MarketOptions time;
    double voll = 2000.0;              // $/MWh
    double substation_price = 50.0;    // $/MWh
    double v_substation = 1.0;         // pu magnitude
    LossModel loss = LossModel::full;
    bool shedding = true;
};

struct GridIndex {
    int horizon = 0;
    // [t][node] / [t][line]
    std::vector<std::vector<Vec3i>> v, fp, fq, a;
    std::vector<Vec3i> pug, qug;
    std::vector<std::vector<Vec3i>> pbal, qbal, vdrop;
    std::vector<std::vector<Vec3i>> relax_cone;
    // [consumer][t], [t][node]
    std::vector<std::vector<Vec3i>> shd_consumer;
    std::vector<std::vector<Vec3i>> shd_base;
    std::vector<std::vector<Vec3>> base_p, base_q;
    // reactive-to-active ratio of the curtailable load
    std::vector<Vec3> consumer_ratio;
    std::vector<Vec3> base_ratio;
    // [line]: in service and feeding something on that phase
    std::vector<std::array<bool, 3>> live;
};

// Network loads not bound to a consumer.
std::vector<NodeLoad> base_loads(const Network& net, const Agents& agents);

GridIndex assemble_grid(conic::ConicProblem& prob, const Network& net, const Agents& agents, const MarketIndex& market,
                        const GridOptions& opts);

struct SocGap {
    int line;
    int phase;
    int t;
    double gap;
};

struct SocReport {
    std::vector<SocGap> gaps;
    double max_gap = 0.0;
    double mean_gap = 0.0;
    std::vector<SocGap> flagged;  // gap > threshold
};

SocReport check_soc_tightness(const std::vector<double>& x, const GridIndex& gi, const Network& net,
                              double eps = 1e-8, double threshold = 1e-4);

}  // namespace p2pgrid
