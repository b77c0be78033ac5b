#pragma once

#include "pipeflow/netgraph.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace pipeflow {

/// Increasing density-to-potential map h and increasing flow law g for
/// closures whose dissipation function factors as f(u, v) = g(h'(u) * v).
/// Under this structure a steady edge integrates exactly to
///   g_inverse(phi) * L = h(rho(0)) - h(rho(L)).
class PotentialForm {
public:
    virtual ~PotentialForm() = default;

    virtual double h(double rho) const = 0;
    virtual double h_prime(double rho) const = 0;
    virtual double h_inverse(double psi) const = 0;
    virtual double g(double y) const = 0;
    virtual double g_inverse(double phi) const = 0;
};

/// Edge dissipation law f(t, u, v): local density u and spatial density
/// gradient v map to the (negated) mass flow, phi = -f. Strict monotonicity
/// in v is the standing hypothesis of every ordering result and is checked
/// at load time for custom closures.
class DissipationModel {
public:
    enum class Form { ideal_gas, potential_form, custom };

    virtual ~DissipationModel() = default;

    virtual double eval(double t, double u, double v) const = 0;
    virtual double d_du(double t, double u, double v) const = 0;
    virtual double d_dv(double t, double u, double v) const = 0;
    virtual Form form() const = 0;

    /// Non-null when the closure carries an exact potential structure.
    virtual const PotentialForm* potential() const { return nullptr; }
};

using ModelPtr = std::shared_ptr<const DissipationModel>;

/// Constant-compressibility equation of state, p = cs2 * rho with
/// cs2 = Z*R*T.
struct GasConstants {
    double R = 473.92;   // J/(kg K)
    double T = 288.706;  // K
    double Z = 1.0;

    double cs2() const { return Z * R * T; }
};

/// Isothermal ideal-gas friction closure for a pipe:
///   f(u, v) = sign(v) * S * sqrt((2 D cs2 / lambda) * u * |v|),
/// obtained by dropping the inertia term from the momentum balance and
/// substituting p = cs2 * rho. Satisfies the friction-balance identity
///   cs2 * u * v = -(lambda / (2 D S^2)) * phi * |phi|  with  phi = -f.
/// Carries the exact potential structure h(rho) = (cs2/2) rho^2,
/// g_inverse(phi) = (lambda / (2 D S^2)) * phi * |phi|.
class IdealGasClosure final : public DissipationModel, public PotentialForm {
public:
    IdealGasClosure(GasConstants gas, PipeGeometry pipe);

    double eval(double t, double u, double v) const override;
    double d_du(double t, double u, double v) const override;
    double d_dv(double t, double u, double v) const override;
    Form form() const override { return Form::ideal_gas; }
    const PotentialForm* potential() const override { return this; }

    double h(double rho) const override;
    double h_prime(double rho) const override;
    double h_inverse(double psi) const override;
    double g(double y) const override;
    double g_inverse(double phi) const override;

    const GasConstants& gas() const { return gas_; }
    const PipeGeometry& pipe() const { return pipe_; }

private:
    GasConstants gas_;
    PipeGeometry pipe_;
    double k_; // 2 D cs2 / lambda
};

/// User-supplied closure; the loader runs check_monotone_v over a sample grid
/// before accepting one.
class CustomDissipation final : public DissipationModel {
public:
    using Fn = std::function<double(double, double, double)>;

    CustomDissipation(Fn eval_fn, Fn du_fn, Fn dv_fn, std::shared_ptr<const PotentialForm> pot = nullptr)
        : eval_(std::move(eval_fn)), du_(std::move(du_fn)), dv_(std::move(dv_fn)), pot_(std::move(pot)) {}

    double eval(double t, double u, double v) const override { return eval_(t, u, v); }
    double d_du(double t, double u, double v) const override { return du_(t, u, v); }
    double d_dv(double t, double u, double v) const override { return dv_(t, u, v); }
    Form form() const override { return pot_ ? Form::potential_form : Form::custom; }
    const PotentialForm* potential() const override { return pot_.get(); }

private:
    Fn eval_, du_, dv_;
    std::shared_ptr<const PotentialForm> pot_;
};

/// phi = -f(t, u, v). Throws NonPositiveDensity for u <= 0.
double flow_from_gradient(const DissipationModel& m, double t, double u, double v);

/// Exact steady density profile of one edge under the potential form:
///   rho(x) = h_inverse(h(rho_in) - g_inverse(phi) * x).
/// Construction throws DensityCavitation when the potential would reach zero
/// before x = L.
class SteadyEdgeProfile {
public:
    SteadyEdgeProfile(const PotentialForm& pf, double phi, double rho_in, double length);

    double operator()(double x) const;
    double length() const { return length_; }
    double outlet() const { return (*this)(length_); }

private:
    const PotentialForm& pf_;
    double psi_in_, slope_, length_;
};

struct MonotoneSample {
    double t, u, v;
};

struct MonotoneVerdict {
    bool ok = true;
    struct Failure {
        MonotoneSample at;
        double d_dv;
        double fd; // central finite difference, NaN when skipped
        const char* reason;
    };
    std::vector<Failure> failures;
};

/// Verifies d_dv > 0 at every sample and cross-checks the analytic derivative
/// against a central finite difference away from the v = 0 kink.
MonotoneVerdict check_monotone_v(const DissipationModel& m, const std::vector<MonotoneSample>& samples,
                                 double fd_rel_tol = 1e-6);

} // namespace pipeflow
