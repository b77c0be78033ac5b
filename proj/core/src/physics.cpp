#include "pipeflow/physics.hpp"

#include "pipeflow/errors.hpp"

#include <cmath>
#include <limits>

namespace pipeflow {

IdealGasClosure::IdealGasClosure(GasConstants gas, PipeGeometry pipe) : gas_(gas), pipe_(pipe) {
    require(gas_.R > 0.0 && gas_.T > 0.0 && gas_.Z > 0.0, Errc::non_positive_parameter,
            "gas constants must be positive");
    require(pipe_.diameter > 0.0 && pipe_.friction > 0.0, Errc::non_positive_parameter,
            "pipe parameters must be positive");
    if (pipe_.area <= 0.0) pipe_.area = PipeGeometry::circular_area(pipe_.diameter);
    k_ = 2.0 * pipe_.diameter * gas_.cs2() / pipe_.friction;
}

double IdealGasClosure::eval(double, double u, double v) const {
    require(u > 0.0, Errc::non_positive_density, "dissipation closure needs a positive density");
    double mag = pipe_.area * std::sqrt(k_ * u * std::abs(v));
    return v >= 0.0 ? mag : -mag;
}

double IdealGasClosure::d_du(double, double u, double v) const {
    require(u > 0.0, Errc::non_positive_density, "dissipation closure needs a positive density");
    if (v == 0.0) return 0.0;
    double mag = 0.5 * pipe_.area * std::sqrt(k_ * std::abs(v) / u);
    return v > 0.0 ? mag : -mag;
}

double IdealGasClosure::d_dv(double, double u, double v) const {
    require(u > 0.0, Errc::non_positive_density, "dissipation closure needs a positive density");
    double av = std::abs(v);
    if (av == 0.0) return std::numeric_limits<double>::infinity(); // sqrt kink
    return 0.5 * pipe_.area * std::sqrt(k_ * u / av);
}

double IdealGasClosure::h(double rho) const { return 0.5 * gas_.cs2() * rho * rho; }

double IdealGasClosure::h_prime(double rho) const { return gas_.cs2() * rho; }

double IdealGasClosure::h_inverse(double psi) const {
    require(psi > 0.0, Errc::density_cavitation, "potential must stay positive");
    return std::sqrt(2.0 * psi / gas_.cs2());
}

double IdealGasClosure::g(double y) const {
    double mag = pipe_.area * std::sqrt(2.0 * pipe_.diameter * std::abs(y) / pipe_.friction);
    return y >= 0.0 ? mag : -mag;
}

double IdealGasClosure::g_inverse(double phi) const {
    double s2 = pipe_.area * pipe_.area;
    return pipe_.friction / (2.0 * pipe_.diameter * s2) * phi * std::abs(phi);
}

double flow_from_gradient(const DissipationModel& m, double t, double u, double v) {
    require(u > 0.0, Errc::non_positive_density, "flow_from_gradient needs a positive density");
    return -m.eval(t, u, v);
}

SteadyEdgeProfile::SteadyEdgeProfile(const PotentialForm& pf, double phi, double rho_in, double length)
    : pf_(pf), length_(length) {
    require(rho_in > 0.0, Errc::non_positive_density, "inlet density must be positive");
    require(length > 0.0, Errc::non_positive_parameter, "edge length must be positive");
    psi_in_ = pf_.h(rho_in);
    slope_ = pf_.g_inverse(phi);
    if (psi_in_ - slope_ * length_ <= 0.0)
        fail(Errc::density_cavitation, "steady profile reaches zero potential before the outlet");
}

double SteadyEdgeProfile::operator()(double x) const {
    return pf_.h_inverse(psi_in_ - slope_ * x);
}

MonotoneVerdict check_monotone_v(const DissipationModel& m, const std::vector<MonotoneSample>& samples,
                                 double fd_rel_tol) {
    MonotoneVerdict verdict;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& s : samples) {
        double dv = m.d_dv(s.t, s.u, s.v);
        if (!(dv > 0.0)) {
            verdict.failures.push_back({s, dv, nan, "d_dv not positive"});
            continue;
        }
        // FD cross-check. The step must be well inside the smooth region, so
        // skip samples too close to the v = 0 kink.
        double scale = std::max(std::abs(s.v), 1e-12);
        double step = 1e-6 * scale;
        if (std::abs(s.v) < 16.0 * step || !std::isfinite(dv)) continue;
        double fd = (m.eval(s.t, s.u, s.v + step) - m.eval(s.t, s.u, s.v - step)) / (2.0 * step);
        if (!(fd > 0.0) || std::abs(fd - dv) > fd_rel_tol * std::max(std::abs(dv), std::abs(fd)))
            verdict.failures.push_back({s, dv, fd, "analytic d_dv disagrees with finite difference"});
    }
    verdict.ok = verdict.failures.empty();
    return verdict;
}

} // namespace pipeflow
