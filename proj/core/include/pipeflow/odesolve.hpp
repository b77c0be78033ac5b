#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace pipeflow {

/// Right-hand side callback: dydt = F(t, y).
using OdeRhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt)>;

struct OdeOptions {
    double rtol = 1e-7;
    double atol = 1e-9;
    double h_init = 0.0; // 0 = automatic
    double h_min = 0.0;  // 0 = span * 1e-14
    double h_max = 0.0;  // 0 = span
    std::uint64_t max_steps = 2'000'000;
    bool enforce_positive = true;          // reject steps leaving the positive orthant
    std::vector<double> forced_times;      // step boundaries to land on exactly
    bool store_dense = true;
};

struct OdeStats {
    std::uint64_t steps = 0;
    std::uint64_t rejected = 0;
    std::uint64_t newton_iterations = 0;
    std::uint64_t rhs_evaluations = 0;
    std::uint64_t jacobian_evaluations = 0;
};

/// Accepted-step record for cubic-Hermite dense output.
struct OdeSolution {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> y;
    std::vector<Eigen::VectorXd> f;
    OdeStats stats;

    /// Interpolates the solution anywhere inside the integrated span.
    Eigen::VectorXd at(double time) const;
    double component_at(int index, double time) const;
    double t_begin() const { return t.front(); }
    double t_end() const { return t.back(); }
};

/// One-step TR-BDF2 integrator (trapezoidal stage + BDF2 stage with
/// gamma = 2 - sqrt(2)): L-stable, second order, with an embedded third-order
/// error estimate and a shared iteration matrix for both implicit stages.
/// Jacobians come from forward differences of the rhs.
class TrBdf2 {
public:
    explicit TrBdf2(OdeOptions opts = {}) : opts_(std::move(opts)) {}

    /// Integrates y' = rhs over [t0, t1]. Throws StepFailure when the step
    /// control collapses and DensityCavitation when positivity cannot be
    /// maintained.
    OdeSolution integrate(const OdeRhs& rhs, const Eigen::VectorXd& y0, double t0, double t1) const;

private:
    OdeOptions opts_;
};

} // namespace pipeflow
