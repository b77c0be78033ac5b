#pragma once

#include "pipeflow/transient.hpp"

#include <optional>
#include <vector>

namespace pipeflow {

/// Where an order violation first appears: refined vertex plus its position
/// on the parent graph.
struct CrossingPoint {
    double t = 0.0;
    VertexId refined_vertex = 0;
    bool at_parent_node = false;
    VertexId parent_vertex = 0; // valid when at_parent_node
    int parent_edge = -1;       // valid otherwise
    double arclength = 0.0;     // along the parent edge, m
};

struct OrderReport {
    bool ordered = false;
    double tol = 0.0;
    double worst_margin = 0.0; // min over vertices and times of rho1 - rho2
    std::optional<CrossingPoint> first_crossing;
    std::vector<double> times;
    Eigen::MatrixXd margins; // refined vertices x times
};

/// Pointwise margins rho1 - rho2 on the shared grid; if the minimum drops
/// below -tol, the earliest crossing is refined by bisection on the dense
/// output and must persist below -tol for three subsequent dense samples
/// (one eighth of the grid spacing apart) to count.
OrderReport check_order(const Trajectory& t1, const Trajectory& t2, double tol_order);

struct Theorem3Options {
    double tol_order = 1e-6;       // kg/m^3
    double hypothesis_tol = 1e-12; // slack when validating input ordering
    IntegrateOptions integrate;
};

/// Validates the ordering hypotheses (initial states, injections, slack
/// densities; shared compression schedules), runs both IBVPs on a shared
/// grid and reports check_order. Throws HypothesisViolated when the inputs
/// are not ordered.
OrderReport verify_theorem3(const MetricGraph& g, const std::vector<ModelPtr>& models, double epsilon,
                            const Scenario& s1, const Scenario& s2, const Theorem3Options& opts = {});

struct JacobianReport {
    struct Entry {
        int row, col;
        double value;
        int sample;
    };
    std::vector<Entry> metzler_violations;   // off-diagonal dF_i/drho_j < -tol
    std::vector<Entry> input_nonneg_violations; // dF_i/dq_j < -tol
    std::vector<Entry> input_coupling_violations; // off-diagonal dF_i/dq_j != 0 or diagonal <= 0
    int samples = 0;
    double tol = 0.0;

    bool ok() const {
        return metzler_violations.empty() && input_nonneg_violations.empty() &&
               input_coupling_violations.empty();
    }
};

/// Central finite-difference Jacobians of the nodal rhs with respect to the
/// state and the injections, checked for the Metzler / non-negativity
/// structure that monotone order propagation rests on. tol_scale multiplies
/// the per-sample Jacobian magnitude.
JacobianReport jacobian_check(const OdeSystem& sys, const std::vector<Eigen::VectorXd>& states,
                              const std::vector<double>& times, double tol_scale = 1e-8);

struct CrossingClassification {
    bool at_parent_node = false;
    VertexId parent_vertex = 0;
    int parent_edge = -1;
    double arclength = 0.0;
};

/// Classifies a report's first crossing against the refinement's coordinate
/// map. Throws NoCrossing when the report has none.
CrossingClassification localize_first_crossing(const OrderReport& report, const RefinedGraph& rg);

} // namespace pipeflow
