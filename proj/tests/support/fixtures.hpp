#pragma once

#include "pipeflow/netio.hpp"
#include "pipeflow/netgraph.hpp"
#include "pipeflow/physics.hpp"
#include "pipeflow/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

namespace pipeflow::test {

inline GasConstants paper_gas() { return GasConstants{473.92, 288.706, 1.0}; }

inline PipeGeometry paper_pipe(double length = 20000.0) {
    PipeGeometry p;
    p.length = length;
    p.diameter = 0.9144;
    p.friction = 0.01;
    p.area = PipeGeometry::circular_area(p.diameter);
    return p;
}

/// Inlet density equivalent to 6.5 MPa under the constant-Z law.
inline double inlet_density_65mpa() { return 6.5e6 / paper_gas().cs2(); }

inline Network single_pipe_network() {
    Network net;
    net.title = "single pipe";
    EdgeSpec e{1, 2, paper_pipe()};
    net.graph = MetricGraph::build({1, 2}, {e}, {1});
    net.models = {std::make_shared<IdealGasClosure>(paper_gas(), e.pipe)};
    return net;
}

/// Outlet withdrawal ramping smoothly through three cycles over the horizon,
/// peak `amplitude` kg/s, zero at t = 0:  w(t) = (A/2)(1 - cos(6 pi t / T)).
inline TimeFunction slow_outlet_withdrawal(double amplitude, double horizon = 86400.0) {
    return TimeFunction::sinusoid(-amplitude / 2.0, amplitude / 2.0, horizon / 3.0, M_PI / 2.0);
}

inline Scenario single_pipe_slow_scenario(double amplitude, double horizon = 86400.0) {
    Scenario s;
    s.horizon = horizon;
    s.slack_density[1] = TimeFunction::constant(inlet_density_65mpa());
    s.injections[2] = slow_outlet_withdrawal(amplitude, horizon);
    s.initial = InitialState::uniform(inlet_density_65mpa());
    return s;
}

/// 5-node, 5-pipe test network: one slack vertex (1), withdrawals at 2..5,
/// three nodal compressors (edge inlets of (1,2), (2,3) and (2,4)). The pipe
/// parameters follow the scale of the published 5-node test case; all checks
/// against this fixture are qualitative or derived from our own runs.
inline Network five_node_network() {
    Network net;
    net.title = "five node";
    std::vector<EdgeSpec> edges = {
        {1, 2, paper_pipe(20000.0)}, {2, 3, paper_pipe(70000.0)}, {2, 4, paper_pipe(10000.0)},
        {3, 5, paper_pipe(60000.0)}, {4, 5, paper_pipe(80000.0)},
    };
    net.graph = MetricGraph::build({1, 2, 3, 4, 5}, edges, {1});
    for (const auto& e : edges) net.models.push_back(std::make_shared<IdealGasClosure>(paper_gas(), e.pipe));
    return net;
}

/// Compression schedule of compressor 3 from the test case:
/// c(t) = c0 * (1 + (1/10)(1 - cos(6 pi t / T))).
inline TimeFunction compressor3_ratio(double c0, double horizon) {
    return TimeFunction::sinusoid(1.1 * c0, 0.1 * c0, horizon / 3.0, -M_PI / 2.0);
}

inline Scenario five_node_base_scenario(double horizon = 43200.0, bool modulate_c3 = true) {
    Scenario s;
    s.horizon = horizon;
    s.slack_density[1] = TimeFunction::constant(5.0e6 / paper_gas().cs2());
    s.injections[2] = TimeFunction::constant(-30.0);
    s.injections[3] = TimeFunction::constant(-40.0);
    s.injections[4] = TimeFunction::constant(-35.0);
    s.injections[5] = TimeFunction::constant(-50.0);
    s.compat.assign(5, EdgeCompat{});
    s.compat[0].inlet = CompatSchedule::multiplicative(TimeFunction::constant(1.2));
    s.compat[1].inlet = CompatSchedule::multiplicative(TimeFunction::constant(1.1));
    s.compat[2].inlet = CompatSchedule::multiplicative(
        modulate_c3 ? compressor3_ratio(1.1, horizon) : TimeFunction::constant(1.1));
    s.initial = InitialState::steady();
    return s;
}

/// Withdrawal pair at node 5 whose order reverses at t_rev: case a withdraws
/// W - A cos(pi t / (2 t_rev)) (less before t_rev, more after), case b holds
/// W. As injections, q_a >= q_b until t_rev and q_a <= q_b afterwards.
struct ReversalPair {
    Scenario a;
    Scenario b;
    double t_rev;
};

inline ReversalPair five_node_reversal_pair(double horizon = 43200.0) {
    ReversalPair pair;
    pair.t_rev = 3.8888 * 3600.0;
    pair.a = five_node_base_scenario(horizon);
    pair.b = five_node_base_scenario(horizon);
    double W = 50.0, A = 20.0;
    // q = -W + A cos(pi t / (2 t_rev)) = sinusoid with period 4 t_rev.
    pair.a.injections[5] = TimeFunction::sinusoid(-W, A, 4.0 * pair.t_rev, M_PI / 2.0);
    pair.b.injections[5] = TimeFunction::constant(-W);
    return pair;
}

/// Randomized connected network (tree or tree + one chord), 3..max_vertices
/// parent vertices, for the property suites.
struct RandomNet {
    Network net;
    double epsilon; // max edge length / 4
};

inline RandomNet random_network(std::mt19937_64& rng, int max_vertices = 6, int max_slack = 2) {
    std::uniform_int_distribution<int> nv_d(3, max_vertices);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int nv = nv_d(rng);

    double base_len = 15000.0 + 25000.0 * unit(rng);
    auto rand_len = [&] { return base_len * (1.0 + unit(rng)); };

    std::vector<EdgeSpec> edges;
    std::vector<std::pair<int, int>> pairs;
    auto add_edge = [&](int a, int b) {
        EdgeSpec e;
        bool flip = unit(rng) < 0.5;
        e.tail = flip ? b : a;
        e.head = flip ? a : b;
        e.pipe = paper_pipe(rand_len());
        if (unit(rng) < 0.3) e.pipe.diameter = 0.635;
        e.pipe.area = PipeGeometry::circular_area(e.pipe.diameter);
        edges.push_back(e);
        pairs.push_back({std::min(a, b), std::max(a, b)});
    };
    for (int v = 2; v <= nv; ++v) {
        std::uniform_int_distribution<int> parent_d(1, v - 1);
        add_edge(parent_d(rng), v);
    }
    if (nv >= 3 && unit(rng) < 0.5) {
        // One chord makes a single cycle; skip if it would duplicate an edge.
        std::uniform_int_distribution<int> v_d(1, nv);
        for (int tries = 0; tries < 10; ++tries) {
            int a = v_d(rng), b = v_d(rng);
            if (a == b) continue;
            auto key = std::make_pair(std::min(a, b), std::max(a, b));
            if (std::find(pairs.begin(), pairs.end(), key) != pairs.end()) continue;
            add_edge(a, b);
            break;
        }
    }

    int n_slack = 1 + (max_slack > 1 && unit(rng) < 0.3 ? 1 : 0);
    std::vector<VertexId> vertices, slack;
    for (int v = 1; v <= nv; ++v) vertices.push_back(v);
    slack.push_back(1);
    if (n_slack == 2 && nv >= 4) slack.push_back(nv);

    RandomNet rn;
    rn.net.title = "random";
    rn.net.graph = MetricGraph::build(vertices, edges, slack);
    double max_len = 0.0;
    for (const auto& e : edges) max_len = std::max(max_len, e.pipe.length);
    rn.epsilon = max_len / 4.0;
    for (const auto& e : rn.net.graph.edges())
        rn.net.models.push_back(std::make_shared<IdealGasClosure>(paper_gas(), e.pipe));
    return rn;
}

/// Ordered scenario pair on a random network: smooth boundary data with
/// non-negative gaps (some exactly zero), shared compression schedules,
/// steady initialization from each side's own t = 0 data.
struct OrderedPair {
    Scenario low;  // q^(2)
    Scenario high; // q^(1)
};

inline OrderedPair random_ordered_pair(std::mt19937_64& rng, const MetricGraph& g, double horizon) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    OrderedPair p;
    p.low.horizon = p.high.horizon = horizon;

    double rho_base = 35.0 + 20.0 * unit(rng);
    for (VertexId v : g.slack_set()) {
        double amp = unit(rng) < 0.5 ? 0.0 : 0.5 * unit(rng);
        double period = horizon * (0.5 + unit(rng));
        double phase = 2.0 * M_PI * unit(rng);
        double gap = unit(rng) < 0.25 ? 0.0 : 0.05 + 0.4 * unit(rng);
        // Same waveform shifted by the gap, so the pair stays ordered for all t.
        p.low.slack_density[v] = amp == 0.0 ? TimeFunction::constant(rho_base)
                                            : TimeFunction::sinusoid(rho_base, amp, period, phase);
        p.high.slack_density[v] = amp == 0.0
                                      ? TimeFunction::constant(rho_base + gap)
                                      : TimeFunction::sinusoid(rho_base + gap, amp, period, phase);
    }

    for (VertexId v : g.flow_set()) {
        double w = 5.0 + 30.0 * unit(rng); // withdrawal magnitude
        double amp = w * 0.3 * unit(rng);
        double period = 1800.0 + 7200.0 * unit(rng);
        double phase = 2.0 * M_PI * unit(rng);
        TimeFunction lo = TimeFunction::sinusoid(-w, amp, period, phase);
        p.low.injections[v] = lo;
        double gap = unit(rng) < 0.25 ? 0.0 : w * (0.02 + 0.15 * unit(rng));
        p.high.injections[v] = TimeFunction::sinusoid(-w + gap, amp, period, phase);
    }

    std::size_t ne = static_cast<std::size_t>(g.edge_count());
    p.low.compat.assign(ne, EdgeCompat{});
    for (std::size_t e = 0; e < ne; ++e) {
        if (unit(rng) < 0.3) {
            double c0 = 1.05 + 0.25 * unit(rng);
            TimeFunction ratio =
                unit(rng) < 0.5
                    ? TimeFunction::constant(c0)
                    : TimeFunction::sinusoid(c0, 0.05 * c0, horizon / (1.0 + 2.0 * unit(rng)), -M_PI / 2.0);
            (unit(rng) < 0.5 ? p.low.compat[e].inlet : p.low.compat[e].outlet) =
                CompatSchedule::multiplicative(ratio);
        }
    }
    p.high.compat = p.low.compat;
    p.low.initial = InitialState::steady();
    p.high.initial = InitialState::steady();
    return p;
}

} // namespace pipeflow::test
