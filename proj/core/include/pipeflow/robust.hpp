#pragma once

#include "pipeflow/monotone.hpp"
#include "pipeflow/transient.hpp"

#include <map>
#include <vector>

namespace pipeflow {

/// Interval injection uncertainty per flow vertex plus network density
/// bounds. Vertices missing from the maps are treated as certain (their base
/// injection is used for all scenarios).
struct Envelope {
    std::map<VertexId, TimeFunction> upper; // q^(1)
    std::map<VertexId, TimeFunction> lower; // q^(2)
    double rho_min = 0.0;
    double rho_max = 0.0;
};

struct EnvelopeCertificate {
    bool feasible = false;
    struct Violation {
        double t;
        VertexId refined_vertex;
        double density;
        bool below; // true: lower run under rho_min, false: upper run over rho_max
    };
    std::vector<Violation> violations;
    Trajectory nominal;
    Trajectory upper;
    Trajectory lower;
};

struct RobustOptions {
    IntegrateOptions integrate;
    double tol_order = 1e-6;   // kg/m^3, monitoring band
    double tol_q = 1e-9;       // kg/s, envelope membership slack
};

/// Runs the three IBVPs sharing controls, slack data and the base initial
/// state (nominal, upper envelope, lower envelope) and certifies
/// rho_min <= rho^(2) and rho^(1) <= rho_max at every refined vertex and
/// output time. Ordered trajectories then sandwich every injection profile
/// inside the envelope, so the certificate covers them all.
EnvelopeCertificate certify_envelope(const MetricGraph& g, const std::vector<ModelPtr>& models,
                                     double epsilon, const Scenario& base, const Envelope& env,
                                     const RobustOptions& opts = {});

struct PolicyAction {
    double t;
    VertexId parent_vertex;
    bool pin_to_upper; // otherwise pinned to the lower bound
    double trigger_margin;
};

struct PolicyTrace {
    std::vector<PolicyAction> actions;
    std::map<VertexId, TimeFunction> effective_injections; // parent flow vertices
    Trajectory closed_loop;
    Trajectory upper;
    Trajectory lower;
};

/// Nodal monitoring policy: nodes whose realized injection leaves the
/// envelope are watched against the corresponding envelope density
/// trajectory; at the first crossing the node's injection is pinned to the
/// violated bound from that time onward (never released). Returns the full
/// closed-loop trace. With `enabled = false` no pins are applied (ablation).
PolicyTrace run_nmp(const MetricGraph& g, const std::vector<ModelPtr>& models, double epsilon,
                    const Envelope& env, const Scenario& base, const Scenario& realized,
                    const RobustOptions& opts = {}, bool enabled = true);

struct SandwichVerdict {
    bool ok = false;
    double worst_margin = 0.0;
    double t = 0.0;
    VertexId refined_vertex = 0;
    bool below = false; // offending side
};

/// Checks rho^(2) - tol <= rho <= rho^(1) + tol over all refined vertices and
/// output times of the closed-loop trace.
SandwichVerdict verify_corollary1(const PolicyTrace& trace, double tol);

} // namespace pipeflow
