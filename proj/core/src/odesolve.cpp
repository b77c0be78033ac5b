#include "pipeflow/odesolve.hpp"

#include "pipeflow/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pipeflow {

namespace {

constexpr double kGamma = 2.0 - M_SQRT2;       // TR stage width
constexpr double kD = 1.0 - M_SQRT1_2;         // shared iteration-matrix factor gamma/2

// Coefficients of the embedded third-order companion formula
// yhat = y_n + h (d1 f_n + d2 f_gamma + d3 f_{n+1}).
const double kD2 = 1.0 / (6.0 * kGamma * (1.0 - kGamma));
const double kD3 = 0.5 - 1.0 / (6.0 * (1.0 - kGamma));
const double kD1 = 1.0 - kD2 - kD3;

} // namespace

Eigen::VectorXd OdeSolution::at(double time) const {
    require(!t.empty(), Errc::bad_argument, "empty solution");
    if (time <= t.front()) return y.front();
    if (time >= t.back()) return y.back();
    auto it = std::upper_bound(t.begin(), t.end(), time);
    std::size_t i = static_cast<std::size_t>(it - t.begin());
    double h = t[i] - t[i - 1];
    double s = (time - t[i - 1]) / h;
    // Cubic Hermite on (y, f) at the step endpoints.
    double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    double h10 = s * (1.0 - s) * (1.0 - s);
    double h01 = s * s * (3.0 - 2.0 * s);
    double h11 = s * s * (s - 1.0);
    return h00 * y[i - 1] + h10 * h * f[i - 1] + h01 * y[i] + h11 * h * f[i];
}

double OdeSolution::component_at(int index, double time) const {
    require(!t.empty(), Errc::bad_argument, "empty solution");
    if (time <= t.front()) return y.front()[index];
    if (time >= t.back()) return y.back()[index];
    auto it = std::upper_bound(t.begin(), t.end(), time);
    std::size_t i = static_cast<std::size_t>(it - t.begin());
    double h = t[i] - t[i - 1];
    double s = (time - t[i - 1]) / h;
    double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    double h10 = s * (1.0 - s) * (1.0 - s);
    double h01 = s * s * (3.0 - 2.0 * s);
    double h11 = s * s * (s - 1.0);
    return h00 * y[i - 1][index] + h10 * h * f[i - 1][index] + h01 * y[i][index] +
           h11 * h * f[i][index];
}

OdeSolution TrBdf2::integrate(const OdeRhs& rhs, const Eigen::VectorXd& y0, double t0, double t1) const {
    require(t1 > t0, Errc::bad_argument, "integration span must be forward");
    const Eigen::Index n = y0.size();
    const double span = t1 - t0;
    const double h_min = opts_.h_min > 0.0 ? opts_.h_min : span * 1e-14;
    const double h_max = opts_.h_max > 0.0 ? opts_.h_max : span;

    OdeSolution sol;
    OdeStats& stats = sol.stats;

    auto eval = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& out) {
        rhs(t, y, out);
        ++stats.rhs_evaluations;
    };

    std::vector<double> events = opts_.forced_times;
    events.push_back(t1);
    std::sort(events.begin(), events.end());
    events.erase(std::unique(events.begin(), events.end(),
                             [&](double a, double b) { return std::abs(a - b) < 1e-12 * span; }),
                 events.end());

    auto wrms = [&](const Eigen::VectorXd& err, const Eigen::VectorXd& yref) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double sc = opts_.atol + opts_.rtol * std::abs(yref[i]);
            double q = err[i] / sc;
            acc += q * q;
        }
        return std::sqrt(acc / static_cast<double>(n));
    };

    double t = t0;
    Eigen::VectorXd y = y0;
    Eigen::VectorXd fy(n);
    eval(t, y, fy);

    if (opts_.enforce_positive)
        require((y.array() > 0.0).all(), Errc::density_cavitation,
                "initial state must be strictly positive");

    // Initial step: conservative heuristic from the rhs magnitude.
    double h = opts_.h_init;
    if (h <= 0.0) {
        double ynorm = wrms(y, y);
        double fnorm = wrms(fy, y);
        h = (fnorm > 1e-12) ? 0.01 * ynorm / fnorm : span / 1000.0;
        h = std::clamp(h, h_min, std::min(h_max, span / 10.0));
    }

    Eigen::MatrixXd jac(n, n);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    double h_of_lu = -1.0;

    auto factor = [&](double hstep, double tj, const Eigen::VectorXd& yj, const Eigen::VectorXd& fj) {
        // Forward-difference Jacobian of the rhs.
        Eigen::VectorXd yp = yj, fp(n);
        for (Eigen::Index c = 0; c < n; ++c) {
            double step = std::sqrt(std::numeric_limits<double>::epsilon()) *
                          std::max(std::abs(yj[c]), 1e-8 * (opts_.atol + 1.0));
            yp[c] = yj[c] + step;
            eval(tj, yp, fp);
            jac.col(c) = (fp - fj) / step;
            yp[c] = yj[c];
        }
        ++stats.jacobian_evaluations;
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - (kD * hstep) * jac;
        lu.compute(m);
        h_of_lu = hstep;
    };

    sol.t.push_back(t);
    sol.y.push_back(y);
    sol.f.push_back(fy);

    std::size_t next_event = 0;
    int consecutive_failures = 0;

    while (t < t1 - 1e-12 * span) {
        while (next_event < events.size() && events[next_event] <= t + 1e-12 * span) ++next_event;
        require(next_event < events.size(), Errc::step_failure, "event list exhausted before t1");
        double t_stop = events[next_event];
        bool clipped = false;
        if (t + h >= t_stop - 1e-12 * span) {
            h = t_stop - t;
            clipped = true;
        }
        require(h >= h_min * 0.5, Errc::step_failure,
                "step size collapsed at t=" + std::to_string(t));
        require(stats.steps + stats.rejected < opts_.max_steps, Errc::step_failure,
                "step budget exhausted at t=" + std::to_string(t));

        if (std::abs(h - h_of_lu) > 0.2 * h_of_lu || h_of_lu < 0.0) factor(h, t, y, fy);

        // Simplified Newton for one implicit stage: solve
        //   z = base + w * h * f(ts, z).
        enum class StageResult { ok, no_convergence, left_orthant };
        auto stage = [&](double ts, double w, const Eigen::VectorXd& base, Eigen::VectorXd& z,
                         Eigen::VectorXd& fz) {
            for (int it = 0; it < 12; ++it) {
                eval(ts, z, fz);
                Eigen::VectorXd res = z - base - (w * h) * fz;
                Eigen::VectorXd dz = lu.solve(res);
                z -= dz;
                ++stats.newton_iterations;
                if (opts_.enforce_positive && !(z.array() > 0.0).all())
                    return StageResult::left_orthant;
                if (wrms(dz, z) < 0.03) {
                    eval(ts, z, fz);
                    return StageResult::ok;
                }
            }
            return StageResult::no_convergence;
        };

        bool ok = true;
        bool left_orthant = false;
        double err = 0.0;
        Eigen::VectorXd yg(n), fg(n), yn(n), fn(n);

        // TR stage to t + gamma h.
        yg = y + (kGamma * h) * fy; // predictor
        if (opts_.enforce_positive) yg = yg.cwiseMax(1e-14);
        Eigen::VectorXd base1 = y + (kD * h) * fy;
        StageResult r1 = stage(t + kGamma * h, kD, base1, yg, fg);
        ok = r1 == StageResult::ok;
        left_orthant = r1 == StageResult::left_orthant;

        if (ok) {
            // BDF2 stage to t + h.
            double c_g = 1.0 / (kGamma * (2.0 - kGamma));
            double c_y = (1.0 - kGamma) * (1.0 - kGamma) / (kGamma * (2.0 - kGamma));
            Eigen::VectorXd base2 = c_g * yg - c_y * y;
            yn = yg + ((1.0 - kGamma) * h) * fg; // predictor
            if (opts_.enforce_positive) yn = yn.cwiseMax(1e-14);
            StageResult r2 = stage(t + h, kD, base2, yn, fn);
            ok = r2 == StageResult::ok;
            left_orthant = r2 == StageResult::left_orthant;
        }

        if (ok) {
            // Embedded error estimate, filtered through the iteration matrix so
            // the stiff components do not dominate.
            Eigen::VectorXd est =
                h * (kD1 * fy + kD2 * fg + kD3 * fn) - (yn - y);
            est = lu.solve(est);
            err = wrms(est, yn);
            ok = err <= 1.0 && std::isfinite(err);
        }

        if (!ok) {
            ++stats.rejected;
            ++consecutive_failures;
            if (h <= h_min * 1.0001 && left_orthant)
                fail(Errc::density_cavitation,
                     "state leaves the positive orthant near t=" + std::to_string(t));
            require(consecutive_failures < 60, Errc::step_failure,
                    "repeated step failures at t=" + std::to_string(t));
            h = std::max(h * 0.25, h_min);
            factor(h, t, y, fy);
            continue;
        }

        consecutive_failures = 0;
        ++stats.steps;
        t = clipped ? t_stop : t + h;
        y = yn;
        fy = fn;
        if (opts_.store_dense || t >= t1 - 1e-12 * span) {
            sol.t.push_back(t);
            sol.y.push_back(y);
            sol.f.push_back(fy);
        }

        double grow = err > 1e-10 ? 0.9 * std::pow(err, -1.0 / 3.0) : 5.0;
        h = std::clamp(h * std::clamp(grow, 0.2, 5.0), h_min, h_max);
    }
    return sol;
}

} // namespace pipeflow
