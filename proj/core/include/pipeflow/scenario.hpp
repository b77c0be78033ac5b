#pragma once

#include "pipeflow/netgraph.hpp"
#include "pipeflow/timefunc.hpp"

#include <map>
#include <variant>
#include <vector>

namespace pipeflow {

/// Monotone map between a vertex's internal density and the adjacent
/// edge-endpoint density; the multiplicative kind alpha(t, rho) = c(t)*rho
/// models a compressor with ratio schedule c(t) > 0.
struct CompatSchedule {
    enum class Kind { identity, multiplicative };

    Kind kind = Kind::identity;
    TimeFunction ratio; // used only for multiplicative

    static CompatSchedule identity() { return {}; }
    static CompatSchedule multiplicative(TimeFunction c) {
        return {Kind::multiplicative, std::move(c)};
    }

    double value(double t, double rho) const {
        return kind == Kind::identity ? rho : ratio.value(t) * rho;
    }
    double d_rho(double t) const { return kind == Kind::identity ? 1.0 : ratio.value(t); }
    double d_t(double t, double rho) const {
        return kind == Kind::identity ? 0.0 : ratio.derivative(t) * rho;
    }
};

/// The two actuator slots of one edge: `inlet` sits between the tail vertex
/// and x = 0, `outlet` between x = L and the head vertex.
struct EdgeCompat {
    CompatSchedule inlet;
    CompatSchedule outlet;
};

/// Initial condition selector: solve the t = 0 steady problem, start uniform,
/// or prescribe per-vertex densities (parent vertices on a parent-graph
/// scenario; refined vertices after lifting).
struct InitialState {
    enum class Mode { steady, uniform, per_vertex };

    Mode mode = Mode::steady;
    double uniform_value = 0.0;
    std::map<VertexId, double> values;

    static InitialState steady() { return {}; }
    static InitialState uniform(double rho0) { return {Mode::uniform, rho0, {}}; }
    static InitialState per_vertex(std::map<VertexId, double> v) {
        return {Mode::per_vertex, 0.0, std::move(v)};
    }
};

/// Boundary data and controls for one initial-boundary-value problem on a
/// graph: injections q_i(t) at flow vertices (positive = into the network),
/// prescribed densities at slack vertices, per-edge compatibility schedules,
/// horizon and initial state.
struct Scenario {
    std::map<VertexId, TimeFunction> injections;
    std::map<VertexId, TimeFunction> slack_density;
    std::vector<EdgeCompat> compat; // indexed like graph edges; empty = all identity
    double horizon = 0.0;           // s
    InitialState initial;

    const TimeFunction& injection(VertexId v) const;
    bool has_injection(VertexId v) const { return injections.count(v) != 0; }
};

/// Checks a scenario against its graph: coverage of the slack/flow partition,
/// positivity of slack densities and compression ratios on a sample grid, and
/// (for explicit per-vertex initial states) the t = 0 coupling: positive
/// densities that match the prescribed slack values within `tol0`.
void validate_scenario(const MetricGraph& g, const Scenario& s, double tol0 = 1e-9);

/// Maps a parent-graph scenario onto a refinement: parent injections and
/// schedules are preserved, interior vertices get zero injection and identity
/// compatibility, and explicit initial densities are interpolated linearly
/// along each parent edge between the compatibility-transformed endpoint
/// values.
Scenario lift_scenario(const Scenario& s, const RefinedGraph& rg);

} // namespace pipeflow
