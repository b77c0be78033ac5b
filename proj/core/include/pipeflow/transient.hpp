#pragma once

#include "pipeflow/netgraph.hpp"
#include "pipeflow/odesolve.hpp"
#include "pipeflow/physics.hpp"
#include "pipeflow/scenario.hpp"

#include <map>
#include <memory>
#include <vector>

namespace pipeflow {

struct OdeSystemOptions {
    /// Continuity perturbation: adds eps_pert * (nodal volume) to every nodal
    /// mass balance, the discrete analogue of the perturbed continuity
    /// equation. Must be >= 0.
    double eps_pert = 0.0;
};

/// Nodal density dynamics on a refined graph.
///
/// The state vector holds the densities of the free (flow-set) refined
/// vertices; slack vertices enter as time-dependent inputs. For a free vertex
/// j with adjacent segment endpoints e (weights w_e = S_e * Lhat_e / 2 and
/// endpoint compatibility alpha_e), the balance is
///
///   sum_e w_e d/dt alpha_e(t, rho_j)
///     = q_j(t) + sum_in phi - sum_out phi + eps_pert * vol_j,
///
/// with midpoint flows evaluated with the finite-difference gradient and the
/// density argument taken at this node's own endpoint:
///   incoming (i,j): phi = -f(t, out_a(t,rho_j), (out_a(t,rho_j) - in_a(t,rho_i)) / Lhat)
///   outgoing (j,k): phi = -f(t, in_a(t,rho_j),  (out_a(t,rho_k) - in_a(t,rho_j)) / Lhat).
///
/// That one-sided density argument is what makes the state Jacobian Metzler
/// and the input Jacobian non-negative regardless of the refinement, so order
/// propagation survives discretization.
class OdeSystem {
public:
    OdeSystem(std::shared_ptr<const RefinedGraph> rg, Scenario lifted, std::vector<ModelPtr> parent_models,
              OdeSystemOptions opts = {});

    int dim() const { return static_cast<int>(free_.size()); }
    const RefinedGraph& refined() const { return *rg_; }
    std::shared_ptr<const RefinedGraph> refined_ptr() const { return rg_; }
    const Scenario& scenario() const { return scenario_; }
    const std::vector<ModelPtr>& parent_models() const { return parent_models_; }
    double eps_pert() const { return opts_.eps_pert; }

    /// Free refined vertices in state order.
    const std::vector<VertexId>& free_vertices() const { return free_; }
    int state_index(VertexId refined_vertex) const; // -1 for slack vertices

    void rhs(double t, const Eigen::VectorXd& x, Eigen::VectorXd& dxdt) const;
    /// rhs with an additive injection offset per free vertex (state order);
    /// used by the input-Jacobian checks.
    void rhs_with_extra_injection(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& extra_q,
                                  Eigen::VectorXd& dxdt) const;

    /// Densities of all refined vertices (graph order) for a given state.
    Eigen::VectorXd full_densities(double t, const Eigen::VectorXd& x) const;

    /// Midpoint flow of a refined edge, tail-side density argument.
    double edge_flow(int refined_edge, double t, const Eigen::VectorXd& rho_full) const;
    /// Same midpoint flow evaluated with the head-side density argument.
    double edge_flow_headside(int refined_edge, double t, const Eigen::VectorXd& rho_full) const;

    /// Net injection a slack vertex must supply so that its own lumped mass
    /// balance closes (its volume is driven by the prescribed density).
    double realized_slack_injection(VertexId slack_refined, double t, const Eigen::VectorXd& rho_full) const;

    double slack_density(VertexId slack_refined, double t) const;
    /// Lumped nodal mass sum_e w_e * alpha_e(t, rho_j).
    double nodal_mass(VertexId refined_vertex, double t, double rho) const;
    double nodal_volume(VertexId refined_vertex) const;
    /// q_j + net midpoint flux (own-side arguments) + eps_pert * vol, i.e. the
    /// exact time derivative of nodal_mass along the flow. Used by the audit.
    double nodal_mass_rate(VertexId refined_vertex, double t, const Eigen::VectorXd& rho_full) const;

    std::vector<double> breakpoints(double t0, double t1) const;

private:
    struct Adjacent {
        int edge;
        VertexId other;
        bool incoming;
        double weight;  // S * Lhat / 2
        double inv_len; // 1 / Lhat
        const DissipationModel* model;
        const CompatSchedule* self; // this vertex's endpoint schedule
        const CompatSchedule* far;  // other endpoint's schedule
    };

    double net_flux_own_side(VertexId v, double t, const Eigen::VectorXd& rho_full) const;

    std::shared_ptr<const RefinedGraph> rg_;
    Scenario scenario_;
    std::vector<ModelPtr> parent_models_;
    OdeSystemOptions opts_;
    std::vector<VertexId> free_;
    std::vector<int> state_index_;               // refined vertex -> state slot or -1
    std::vector<std::vector<Adjacent>> adj_;     // per refined vertex
    std::vector<const TimeFunction*> injection_; // per refined vertex (null = zero)
    std::vector<const TimeFunction*> slack_fn_;  // per refined vertex (null for free)
};

struct MassAudit {
    /// Largest per-node |mass change - integrated net injection| over one
    /// output interval, relative to throughput. Bounded by the integrator
    /// tolerance budget.
    double per_node_rel = 0.0;
    /// Network-total defect, relative to throughput. Carries the O(eps)
    /// one-sided-argument closure error of the scheme; diagnostic only.
    double global_rel = 0.0;
    double throughput = 0.0; // integral of |injections| (kg)
};

struct Trajectory {
    std::vector<double> times;
    Eigen::MatrixXd density;   // refined vertices x times
    Eigen::MatrixXd edge_flow; // refined edges x times (tail-side midpoint flow)
    std::map<VertexId, std::vector<double>> realized_slack_injection;
    OdeStats stats;
    double epsilon = 0.0;
    MassAudit audit;
    OdeSolution dense; // free-state dense output
    std::shared_ptr<const OdeSystem> system;

    const RefinedGraph& refined() const { return system->refined(); }
    /// Density of any refined vertex at any time inside the span.
    double density_at(VertexId refined_vertex, double t) const;
    int vertex_row(VertexId refined_vertex) const { return refined().graph().index_of(refined_vertex); }
};

struct IntegrateOptions {
    double rtol = 1e-7;
    double atol = 1e-9;
    double output_dt = 0.0;            // 0 = horizon/200
    std::vector<double> output_times;  // overrides output_dt when nonempty
    std::vector<double> extra_forced_times;
    std::uint64_t max_steps = 2'000'000;
    bool audit = true;
};

/// Integrates the stiff nodal system over [0, horizon] (or the scenario's
/// sub-span given by output_times) and samples the requested grid.
Trajectory integrate(std::shared_ptr<const OdeSystem> sys, const Eigen::VectorXd& x0,
                     const IntegrateOptions& opts = {});

/// Initial state per the scenario's InitialState selector.
Eigen::VectorXd initial_state(const OdeSystem& sys);

/// Equilibrium of the discrete nodal system at t = 0: Newton on rhs(0, x) = 0
/// seeded with the continuum steady solution of the refined graph. The result
/// is an exact fixed point of the integrated dynamics, so trajectories
/// started from it stay put under constant boundary data.
Eigen::VectorXd steady_init(const OdeSystem& sys);

/// Convenience: build the system and integrate one scenario end to end.
Trajectory simulate(const MetricGraph& g, const std::vector<ModelPtr>& models, const Scenario& s,
                    double epsilon, const IntegrateOptions& opts = {},
                    const OdeSystemOptions& sys_opts = {});

} // namespace pipeflow
