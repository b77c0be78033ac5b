#pragma once

#include "pipeflow/netgraph.hpp"
#include "pipeflow/physics.hpp"
#include "pipeflow/scenario.hpp"

#include <map>
#include <optional>
#include <set>
#include <vector>

namespace pipeflow {

/// Time-frozen boundary data for the steady problem: injections at flow
/// vertices, densities at slack vertices, compression ratios per edge.
struct SteadyBoundary {
    struct FrozenCompat {
        double inlet = 1.0;
        double outlet = 1.0;
    };

    std::map<VertexId, double> injection;
    std::map<VertexId, double> slack_density;
    std::vector<FrozenCompat> compat; // empty = identity everywhere

    double injection_at(VertexId v) const {
        auto it = injection.find(v);
        return it == injection.end() ? 0.0 : it->second;
    }
    FrozenCompat compat_at(int edge) const {
        return compat.empty() ? FrozenCompat{} : compat[static_cast<std::size_t>(edge)];
    }
};

/// Evaluates a scenario's boundary data at one instant.
SteadyBoundary freeze_boundary(const MetricGraph& g, const Scenario& s, double t);

struct SteadyOptions {
    double tol_balance_rel = 1e-8; // vs max(1, max |q|), kg/s
    double tol_step = 1e-10;       // relative Newton step norm
    int max_iterations = 50;
    std::map<VertexId, double> initial_guess; // optional override
};

struct SteadyState {
    std::map<VertexId, double> density;             // nodal, all vertices
    std::vector<double> edge_flow;                  // kg/s per edge, constant along the edge
    std::map<VertexId, double> realized_injection;  // slack vertices
    double balance_residual = 0.0;                  // max |R_j| over flow vertices
    double edge_residual = 0.0;                     // max relative dissipation-identity defect
    int newton_iterations = 0;
};

/// Steady flow through one edge given its transformed endpoint densities.
/// Uses the closed-form potential route when the model carries one, otherwise
/// shoots on the edge ODE f(rho, rho') + phi = 0 with an adaptive RK4.
double steady_edge_flow(const DissipationModel& m, double rho_in, double rho_out, double length);

/// Density at positions xs along a steady edge carrying flow phi from inlet
/// density rho_in (potential route or ODE integration).
std::vector<double> steady_edge_densities(const DissipationModel& m, double phi, double rho_in,
                                          double length, const std::vector<double>& xs);

/// Newton iteration on the densities of the flow vertices. Throws
/// NonConvergence, SingularJacobian or DensityCavitation.
SteadyState solve_steady(const MetricGraph& g, const std::vector<ModelPtr>& models,
                         const SteadyBoundary& b, const SteadyOptions& opts = {});

struct SteadyOrderVerdict {
    bool ordered = false;
    double worst_margin = 0.0;
    VertexId worst_vertex = 0;  // parent vertex or edge tail for interior points
    std::optional<std::pair<int, double>> worst_interior; // (edge, x) when interior point is worst
};

/// Solves both boundary sets and checks rho^(1) >= rho^(2) - tol at every
/// vertex and at sampled interior edge points. Inputs must satisfy the
/// ordering hypotheses (throws HypothesisViolated otherwise).
SteadyOrderVerdict verify_theorem1(const MetricGraph& g, const std::vector<ModelPtr>& models,
                                   const SteadyBoundary& b1, const SteadyBoundary& b2, double tol,
                                   int interior_samples = 7, const SteadyOptions& opts = {});

struct UniquenessReport {
    int converged = 0;
    int failed = 0;
    double max_rel_deviation = 0.0;
};

/// Re-solves from n_starts randomized initial guesses and reports the largest
/// pairwise relative deviation of the nodal densities.
UniquenessReport uniqueness_probe(const MetricGraph& g, const std::vector<ModelPtr>& models,
                                  const SteadyBoundary& b, int n_starts, std::uint64_t seed = 12345,
                                  const SteadyOptions& opts = {});

/// Non-intersecting path i1,...,in with i1 outside s_set, in == target, and
/// flows1 <= flows2 along every path edge in the skew-symmetric convention
/// phi_ji = -phi_ij. flows are indexed like g.edges(). Throws PathNotFound
/// when the construction exhausts (which signals violated preconditions).
std::vector<VertexId> aquarius_path(const MetricGraph& g, const std::vector<double>& flows1,
                                    const std::vector<double>& flows2, const std::set<VertexId>& s_set,
                                    VertexId target);

} // namespace pipeflow
