#include "pipeflow/scenario.hpp"

#include "pipeflow/errors.hpp"

#include <cmath>
#include <string>

namespace pipeflow {

const TimeFunction& Scenario::injection(VertexId v) const {
    static const TimeFunction zero = TimeFunction::constant(0.0);
    auto it = injections.find(v);
    return it == injections.end() ? zero : it->second;
}

void validate_scenario(const MetricGraph& g, const Scenario& s, double tol0) {
    require(s.horizon > 0.0, Errc::bad_argument, "scenario horizon must be positive");
    require(s.compat.empty() || s.compat.size() == static_cast<std::size_t>(g.edge_count()),
            Errc::bad_argument, "compat table must be empty or match the edge count");

    for (const auto& [v, fn] : s.injections) {
        require(g.has_vertex(v), Errc::vertex_mismatch, "injection at unknown vertex " + std::to_string(v));
        require(!g.is_slack(v), Errc::vertex_mismatch,
                "injection prescribed at slack vertex " + std::to_string(v));
        (void)fn;
    }
    for (VertexId v : g.slack_set())
        require(s.slack_density.count(v) != 0, Errc::vertex_mismatch,
                "missing slack density at vertex " + std::to_string(v));
    for (const auto& [v, fn] : s.slack_density) {
        require(g.has_vertex(v) && g.is_slack(v), Errc::vertex_mismatch,
                "slack density at non-slack vertex " + std::to_string(v));
        (void)fn;
    }

    // Positivity sweep over a modest grid plus breakpoints.
    std::vector<double> grid;
    for (int k = 0; k <= 64; ++k) grid.push_back(s.horizon * k / 64.0);
    for (const auto& [v, fn] : s.slack_density) {
        std::vector<double> ts = grid;
        fn.collect_breakpoints(0.0, s.horizon, ts);
        for (double t : ts)
            require(fn.value(t) > 0.0, Errc::non_positive_density,
                    "slack density at vertex " + std::to_string(v) + " not positive at t=" + std::to_string(t));
    }
    for (std::size_t e = 0; e < s.compat.size(); ++e) {
        for (const CompatSchedule* cs : {&s.compat[e].inlet, &s.compat[e].outlet}) {
            if (cs->kind == CompatSchedule::Kind::identity) continue;
            std::vector<double> ts = grid;
            cs->ratio.collect_breakpoints(0.0, s.horizon, ts);
            for (double t : ts)
                require(cs->ratio.value(t) > 0.0, Errc::non_positive_parameter,
                        "compression ratio on edge " + std::to_string(e) + " not positive at t=" +
                            std::to_string(t));
        }
    }

    if (s.initial.mode == InitialState::Mode::per_vertex) {
        for (VertexId v : g.vertices()) {
            auto it = s.initial.values.find(v);
            require(it != s.initial.values.end(), Errc::vertex_mismatch,
                    "initial density missing at vertex " + std::to_string(v));
            require(it->second > 0.0, Errc::non_positive_density,
                    "initial density not positive at vertex " + std::to_string(v));
            if (g.is_slack(v)) {
                double prescribed = s.slack_density.at(v).value(0.0);
                require(std::abs(it->second - prescribed) <= tol0 * std::max(1.0, std::abs(prescribed)),
                        Errc::bad_argument,
                        "initial density at slack vertex " + std::to_string(v) +
                            " disagrees with the prescribed boundary value at t=0");
            }
        }
    } else if (s.initial.mode == InitialState::Mode::uniform) {
        require(s.initial.uniform_value > 0.0, Errc::non_positive_density,
                "uniform initial density must be positive");
    }
}

Scenario lift_scenario(const Scenario& s, const RefinedGraph& rg) {
    const MetricGraph& pg = rg.parent();
    validate_scenario(pg, s);

    Scenario out;
    out.horizon = s.horizon;

    for (const auto& [v, fn] : s.injections) out.injections[rg.refined_of_parent(v)] = fn;
    for (const auto& [v, fn] : s.slack_density) out.slack_density[rg.refined_of_parent(v)] = fn;

    // Interior endpoints are identity; the parent's inlet schedule lands on the
    // first segment's inlet, the outlet schedule on the last segment's outlet.
    out.compat.assign(static_cast<std::size_t>(rg.graph().edge_count()), EdgeCompat{});
    if (!s.compat.empty()) {
        for (int pe = 0; pe < pg.edge_count(); ++pe) {
            const auto& segs = rg.segments(pe);
            out.compat[static_cast<std::size_t>(segs.front())].inlet = s.compat[static_cast<std::size_t>(pe)].inlet;
            out.compat[static_cast<std::size_t>(segs.back())].outlet = s.compat[static_cast<std::size_t>(pe)].outlet;
        }
    }

    out.initial.mode = s.initial.mode;
    out.initial.uniform_value = s.initial.uniform_value;
    if (s.initial.mode == InitialState::Mode::per_vertex) {
        std::map<VertexId, double> vals;
        for (VertexId v : pg.vertices()) vals[rg.refined_of_parent(v)] = s.initial.values.at(v);
        for (int pe = 0; pe < pg.edge_count(); ++pe) {
            const auto& ed = pg.edge(pe);
            const EdgeCompat ec = s.compat.empty() ? EdgeCompat{} : s.compat[static_cast<std::size_t>(pe)];
            double rho_in = ec.inlet.value(0.0, s.initial.values.at(ed.tail));
            double rho_out = ec.outlet.value(0.0, s.initial.values.at(ed.head));
            double L = ed.pipe.length;
            for (int seg : rg.segments(pe)) {
                VertexId head = rg.graph().edge(seg).head;
                const auto& c = rg.coord(head);
                if (c.at_parent_node()) continue;
                vals[head] = rho_in + (rho_out - rho_in) * (c.arclength / L);
            }
        }
        out.initial.values = std::move(vals);
    }
    return out;
}

} // namespace pipeflow
