#include "pipeflow/robust.hpp"

#include "pipeflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <set>

namespace pipeflow {

namespace {

Scenario with_injections(const Scenario& base, const std::map<VertexId, TimeFunction>& override_q) {
    Scenario s = base;
    for (const auto& [v, fn] : override_q) s.injections[v] = fn;
    return s;
}

std::vector<double> sample_grid(double T) {
    std::vector<double> ts;
    for (int k = 0; k <= 128; ++k) ts.push_back(T * k / 128.0);
    return ts;
}

void validate_envelope(const MetricGraph& g, const Scenario& base, const Envelope& env, double tol_q,
                       bool base_must_fit) {
    require(env.rho_min > 0.0 && env.rho_max > env.rho_min, Errc::bad_argument,
            "density bounds must satisfy 0 < rho_min < rho_max");
    require(env.upper.size() == env.lower.size(), Errc::envelope_inverted,
            "upper/lower envelope must cover the same vertices");
    auto ts = sample_grid(base.horizon);
    for (const auto& [v, up] : env.upper) {
        require(g.has_vertex(v) && !g.is_slack(v), Errc::vertex_mismatch,
                "envelope vertex " + std::to_string(v) + " is not a flow vertex");
        auto lo = env.lower.find(v);
        require(lo != env.lower.end(), Errc::envelope_inverted,
                "missing lower envelope at vertex " + std::to_string(v));
        std::vector<double> tt = ts;
        up.collect_breakpoints(0.0, base.horizon, tt);
        lo->second.collect_breakpoints(0.0, base.horizon, tt);
        for (double t : tt) {
            require(up.value(t) >= lo->second.value(t) - tol_q, Errc::envelope_inverted,
                    "envelope inverted at vertex " + std::to_string(v) + ", t=" + std::to_string(t));
            if (base_must_fit) {
                double q = base.injection(v).value(t);
                require(q <= up.value(t) + tol_q && q >= lo->second.value(t) - tol_q,
                        Errc::hypothesis_violated,
                        "base injection leaves the envelope at vertex " + std::to_string(v));
            }
        }
    }
}

struct EnvelopeRuns {
    std::shared_ptr<const RefinedGraph> rg;
    Trajectory nominal, upper, lower;
};

EnvelopeRuns run_envelope_trio(const MetricGraph& g, const std::vector<ModelPtr>& models,
                               double epsilon, const Scenario& base, const Envelope& env,
                               const IntegrateOptions& io, const Scenario* nominal_override) {
    EnvelopeRuns r;
    r.rg = std::make_shared<RefinedGraph>(refine(g, epsilon));

    const Scenario& nominal = nominal_override ? *nominal_override : base;
    Scenario up = with_injections(base, env.upper);
    Scenario lo = with_injections(base, env.lower);

    auto sys_nom = std::make_shared<OdeSystem>(r.rg, lift_scenario(nominal, *r.rg), models);
    auto sys_up = std::make_shared<OdeSystem>(r.rg, lift_scenario(up, *r.rg), models);
    auto sys_lo = std::make_shared<OdeSystem>(r.rg, lift_scenario(lo, *r.rg), models);

    // All three start from the base initial state so the ordering hypotheses
    // hold with equality at t = 0.
    auto sys_base = std::make_shared<OdeSystem>(r.rg, lift_scenario(base, *r.rg), models);
    Eigen::VectorXd x0 = initial_state(*sys_base);

    r.nominal = integrate(sys_nom, x0, io);
    r.upper = integrate(sys_up, x0, io);
    r.lower = integrate(sys_lo, x0, io);
    return r;
}

} // namespace

EnvelopeCertificate certify_envelope(const MetricGraph& g, const std::vector<ModelPtr>& models,
                                     double epsilon, const Scenario& base, const Envelope& env,
                                     const RobustOptions& opts) {
    validate_scenario(g, base);
    validate_envelope(g, base, env, opts.tol_q, /*base_must_fit=*/true);

    IntegrateOptions io = opts.integrate;
    io.audit = false;
    EnvelopeRuns runs = run_envelope_trio(g, models, epsilon, base, env, io, nullptr);

    EnvelopeCertificate cert;
    const MetricGraph& rgraph = runs.rg->graph();
    for (std::size_t k = 0; k < runs.lower.times.size(); ++k) {
        for (int vi = 0; vi < rgraph.vertex_count(); ++vi) {
            double rho_lo = runs.lower.density(vi, static_cast<int>(k));
            double rho_up = runs.upper.density(vi, static_cast<int>(k));
            if (rho_lo < env.rho_min)
                cert.violations.push_back({runs.lower.times[k], rgraph.vertex_at(vi), rho_lo, true});
            if (rho_up > env.rho_max)
                cert.violations.push_back({runs.upper.times[k], rgraph.vertex_at(vi), rho_up, false});
        }
    }
    cert.feasible = cert.violations.empty();
    cert.nominal = std::move(runs.nominal);
    cert.upper = std::move(runs.upper);
    cert.lower = std::move(runs.lower);
    return cert;
}

PolicyTrace run_nmp(const MetricGraph& g, const std::vector<ModelPtr>& models, double epsilon,
                    const Envelope& env, const Scenario& base, const Scenario& realized,
                    const RobustOptions& opts, bool enabled) {
    validate_scenario(g, base);
    validate_scenario(g, realized);
    validate_envelope(g, base, env, opts.tol_q, /*base_must_fit=*/false);
    require(std::abs(base.horizon - realized.horizon) <= 1e-9 * base.horizon, Errc::bad_argument,
            "base and realized scenarios must share the horizon");

    IntegrateOptions io = opts.integrate;
    io.audit = false;

    PolicyTrace trace;
    for (VertexId v : g.flow_set()) trace.effective_injections[v] = realized.injection(v);

    // Envelope trajectories (shared controls, slack data and initial state).
    EnvelopeRuns runs = run_envelope_trio(g, models, epsilon, base, env, io, nullptr);
    trace.upper = runs.upper;
    trace.lower = runs.lower;

    auto rg = runs.rg;
    const double T = base.horizon;

    // Event loop: simulate the current effective scenario, find the earliest
    // unhandled crossing at a violating node, pin, repeat. Pinned injections
    // equal the original before the action time, so re-running from t = 0
    // reproduces the closed-loop trajectory exactly.
    std::set<VertexId> pinned;
    double last_action_t = -1.0;
    Trajectory current;
    for (int round = 0; round <= g.vertex_count() + 1; ++round) {
        Scenario eff = base;
        for (const auto& [v, fn] : trace.effective_injections) eff.injections[v] = fn;
        auto sys = std::make_shared<OdeSystem>(rg, lift_scenario(eff, *rg), models);
        auto sys_base = std::make_shared<OdeSystem>(rg, lift_scenario(base, *rg), models);
        Eigen::VectorXd x0 = initial_state(*sys_base);
        current = integrate(sys, x0, io);
        if (!enabled) break;

        // Earliest crossing over monitored, unpinned vertices.
        struct Hit {
            double t;
            VertexId v;
            bool upper_side;
            double margin;
        };
        std::optional<Hit> best;
        for (const auto& [pv, up_fn] : env.upper) {
            if (pinned.count(pv)) continue;
            VertexId rv = rg->refined_of_parent(pv);
            const TimeFunction& lo_fn = env.lower.at(pv);
            const TimeFunction& q_fn = trace.effective_injections.at(pv);

            auto margin_up = [&](double t) { return trace.upper.density_at(rv, t) - current.density_at(rv, t); };
            auto margin_lo = [&](double t) { return current.density_at(rv, t) - trace.lower.density_at(rv, t); };

            for (std::size_t k = 1; k < current.times.size(); ++k) {
                double tk = current.times[k];
                if (tk <= last_action_t) continue;
                bool viol_up = q_fn.value(tk) > up_fn.value(tk) + opts.tol_q;
                bool viol_lo = q_fn.value(tk) < lo_fn.value(tk) - opts.tol_q;
                double mu = margin_up(tk);
                double ml = margin_lo(tk);
                bool hit_up = viol_up && mu < -opts.tol_order;
                bool hit_lo = viol_lo && ml < -opts.tol_order;
                if (!hit_up && !hit_lo) continue;

                bool upper_side = hit_up;
                auto margin = upper_side ? std::function<double(double)>(margin_up)
                                         : std::function<double(double)>(margin_lo);
                double lo_t = std::max(current.times[k - 1], last_action_t);
                double hi_t = tk;
                for (int it = 0; it < 60; ++it) {
                    double mid = 0.5 * (lo_t + hi_t);
                    if (margin(mid) < -opts.tol_order)
                        hi_t = mid;
                    else
                        lo_t = mid;
                }
                Hit h{hi_t, pv, upper_side, margin(hi_t)};
                if (!best || h.t < best->t) best = h;
                break; // first hit of this vertex; later ones are moot
            }
        }
        if (!best) break;

        const TimeFunction& bound =
            best->upper_side ? env.upper.at(best->v) : env.lower.at(best->v);
        trace.effective_injections[best->v] =
            TimeFunction::switched(best->t, trace.effective_injections.at(best->v), bound);
        trace.actions.push_back({best->t, best->v, best->upper_side, best->margin});
        pinned.insert(best->v);
        last_action_t = best->t;
        if (best->t >= T) break;
    }
    trace.closed_loop = std::move(current);
    return trace;
}

SandwichVerdict verify_corollary1(const PolicyTrace& trace, double tol) {
    const Trajectory& cl = trace.closed_loop;
    require(cl.times.size() == trace.upper.times.size() && cl.times.size() == trace.lower.times.size(),
            Errc::grid_mismatch, "policy trace grids differ");
    SandwichVerdict v;
    v.ok = true;
    v.worst_margin = std::numeric_limits<double>::infinity();
    const MetricGraph& g = cl.refined().graph();
    for (std::size_t k = 0; k < cl.times.size(); ++k) {
        for (int vi = 0; vi < g.vertex_count(); ++vi) {
            double rho = cl.density(vi, static_cast<int>(k));
            double up = trace.upper.density(vi, static_cast<int>(k)) - rho; // >= -tol wanted
            double lo = rho - trace.lower.density(vi, static_cast<int>(k));
            for (int side = 0; side < 2; ++side) {
                double m = side == 0 ? up : lo;
                if (m < v.worst_margin) {
                    v.worst_margin = m;
                    v.t = cl.times[k];
                    v.refined_vertex = g.vertex_at(vi);
                    v.below = side == 1;
                }
            }
        }
    }
    v.ok = v.worst_margin >= -tol;
    return v;
}

} // namespace pipeflow
