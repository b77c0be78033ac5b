#include "pipeflow/monotone.hpp"

#include "pipeflow/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pipeflow {

namespace {

CrossingPoint classify(const RefinedGraph& rg, VertexId refined_vertex, double t) {
    CrossingPoint c;
    c.t = t;
    c.refined_vertex = refined_vertex;
    const auto& coord = rg.coord(refined_vertex);
    if (coord.at_parent_node()) {
        c.at_parent_node = true;
        c.parent_vertex = *coord.parent_vertex;
    } else {
        c.at_parent_node = false;
        c.parent_edge = coord.parent_edge;
        c.arclength = coord.arclength;
    }
    return c;
}

} // namespace

OrderReport check_order(const Trajectory& t1, const Trajectory& t2, double tol_order) {
    require(&t1.refined().parent() == &t2.refined().parent() ||
                t1.refined().graph().vertex_count() == t2.refined().graph().vertex_count(),
            Errc::grid_mismatch, "trajectories live on different refinements");
    require(t1.times.size() == t2.times.size(), Errc::grid_mismatch, "output grids differ in size");
    for (std::size_t k = 0; k < t1.times.size(); ++k)
        require(std::abs(t1.times[k] - t2.times[k]) <= 1e-9 * std::max(1.0, std::abs(t1.times[k])),
                Errc::grid_mismatch, "output grids differ");
    require(t1.density.rows() == t2.density.rows(), Errc::grid_mismatch,
            "refined vertex counts differ");

    OrderReport rep;
    rep.tol = tol_order;
    rep.times = t1.times;
    rep.margins = t1.density - t2.density;
    rep.worst_margin = rep.margins.minCoeff();
    rep.ordered = rep.worst_margin >= -tol_order;
    if (rep.ordered) return rep;

    const MetricGraph& g = t1.refined().graph();
    const int nt = static_cast<int>(rep.times.size());

    auto margin_at = [&](int vertex_row, double t) {
        VertexId v = g.vertex_at(vertex_row);
        return t1.density_at(v, t) - t2.density_at(v, t);
    };
    auto min_margin_at = [&](double t) {
        double m = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int vi = 0; vi < g.vertex_count(); ++vi) {
            double mv = margin_at(vi, t);
            if (mv < m) {
                m = mv;
                arg = vi;
            }
        }
        return std::pair<double, int>(m, arg);
    };

    for (int k = 1; k < nt; ++k) {
        if (rep.margins.col(k).minCoeff() >= -tol_order) continue;

        // Earliest sub-grid time where some margin drops below -tol.
        double lo = rep.times[static_cast<std::size_t>(k - 1)];
        double hi = rep.times[static_cast<std::size_t>(k)];
        for (int it = 0; it < 64; ++it) {
            double mid = 0.5 * (lo + hi);
            if (min_margin_at(mid).first < -tol_order)
                hi = mid;
            else
                lo = mid;
        }
        double tc = hi;

        // Persistence: the margin must stay below -tol for three dense samples
        // past tc; otherwise this was a grazing touch, keep scanning.
        double ds = (rep.times[static_cast<std::size_t>(k)] - rep.times[static_cast<std::size_t>(k - 1)]) / 8.0;
        int vertex_row = min_margin_at(std::min(tc + 0.25 * ds, rep.times.back())).second;
        bool persistent = true;
        for (int i = 1; i <= 3; ++i) {
            double ts = std::min(tc + i * ds, rep.times.back());
            if (margin_at(vertex_row, ts) >= -tol_order) {
                persistent = false;
                break;
            }
        }
        if (!persistent) continue;

        rep.first_crossing = classify(t1.refined(), g.vertex_at(vertex_row), tc);
        break;
    }
    if (!rep.first_crossing) {
        // Violation without a persistent sub-grid crossing; report the first
        // offending grid point directly.
        for (int k = 0; k < nt && !rep.first_crossing; ++k) {
            int vi;
            double m = rep.margins.col(k).minCoeff(&vi);
            if (m < -tol_order)
                rep.first_crossing = classify(t1.refined(), g.vertex_at(vi), rep.times[static_cast<std::size_t>(k)]);
        }
    }
    return rep;
}

OrderReport verify_theorem3(const MetricGraph& g, const std::vector<ModelPtr>& models, double epsilon,
                            const Scenario& s1, const Scenario& s2, const Theorem3Options& opts) {
    validate_scenario(g, s1);
    validate_scenario(g, s2);
    require(std::abs(s1.horizon - s2.horizon) <= 1e-9 * s1.horizon, Errc::hypothesis_violated,
            "scenarios must share the horizon");
    require(s1.compat.size() == s2.compat.size(), Errc::hypothesis_violated,
            "scenarios must share the compression schedules");

    const double T = s1.horizon;
    std::vector<double> sample_ts;
    for (int k = 0; k <= 128; ++k) sample_ts.push_back(T * k / 128.0);
    auto check_pair = [&](const TimeFunction& a, const TimeFunction& b, const std::string& what) {
        std::vector<double> ts = sample_ts;
        a.collect_breakpoints(0.0, T, ts);
        b.collect_breakpoints(0.0, T, ts);
        for (double t : ts)
            require(a.value(t) >= b.value(t) - opts.hypothesis_tol, Errc::hypothesis_violated,
                    what + " not ordered at t=" + std::to_string(t));
    };
    for (VertexId v : g.flow_set())
        check_pair(s1.injection(v), s2.injection(v), "injection at vertex " + std::to_string(v));
    for (VertexId v : g.slack_set())
        check_pair(s1.slack_density.at(v), s2.slack_density.at(v),
                   "slack density at vertex " + std::to_string(v));
    for (std::size_t e = 0; e < s1.compat.size(); ++e) {
        for (auto sel : {&EdgeCompat::inlet, &EdgeCompat::outlet}) {
            const CompatSchedule& c1 = s1.compat[e].*sel;
            const CompatSchedule& c2 = s2.compat[e].*sel;
            require(c1.kind == c2.kind, Errc::hypothesis_violated, "compression schedules differ");
            if (c1.kind == CompatSchedule::Kind::multiplicative)
                for (double t : sample_ts)
                    require(std::abs(c1.ratio.value(t) - c2.ratio.value(t)) <= opts.hypothesis_tol,
                            Errc::hypothesis_violated, "compression schedules differ");
        }
    }

    auto rg = std::make_shared<RefinedGraph>(refine(g, epsilon));
    auto sys1 = std::make_shared<OdeSystem>(rg, lift_scenario(s1, *rg), models);
    auto sys2 = std::make_shared<OdeSystem>(rg, lift_scenario(s2, *rg), models);
    Eigen::VectorXd x1 = initial_state(*sys1);
    Eigen::VectorXd x2 = initial_state(*sys2);
    for (Eigen::Index i = 0; i < x1.size(); ++i)
        require(x1[i] >= x2[i] - std::max(opts.hypothesis_tol, 1e-9 * std::abs(x2[i])),
                Errc::hypothesis_violated, "initial states not ordered");

    IntegrateOptions io = opts.integrate;
    io.audit = false;
    Trajectory t1 = integrate(sys1, x1, io);
    Trajectory t2 = integrate(sys2, x2, io);
    return check_order(t1, t2, opts.tol_order);
}

JacobianReport jacobian_check(const OdeSystem& sys, const std::vector<Eigen::VectorXd>& states,
                              const std::vector<double>& times, double tol_scale) {
    require(states.size() == times.size(), Errc::bad_argument, "states and times must pair up");
    JacobianReport rep;
    rep.samples = static_cast<int>(states.size());
    const int n = sys.dim();

    Eigen::VectorXd rp(n), rm(n);
    for (std::size_t s = 0; s < states.size(); ++s) {
        const Eigen::VectorXd& x = states[s];
        require(x.size() == n, Errc::bad_argument, "state dimension mismatch");
        double t = times[s];

        Eigen::MatrixXd jrho(n, n);
        Eigen::VectorXd xp = x, xm = x;
        for (int c = 0; c < n; ++c) {
            double step = 1e-6 * std::max(std::abs(x[c]), 1.0);
            xp[c] = x[c] + step;
            xm[c] = x[c] - step;
            sys.rhs(t, xp, rp);
            sys.rhs(t, xm, rm);
            jrho.col(c) = (rp - rm) / (2.0 * step);
            xp[c] = x[c];
            xm[c] = x[c];
        }
        double scale = std::max(1.0, jrho.diagonal().cwiseAbs().maxCoeff());
        double tol = tol_scale * scale;
        rep.tol = tol;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j && jrho(i, j) < -tol)
                    rep.metzler_violations.push_back({i, j, jrho(i, j), static_cast<int>(s)});

        Eigen::MatrixXd jq(n, n);
        Eigen::VectorXd qp = Eigen::VectorXd::Zero(n), qm = Eigen::VectorXd::Zero(n);
        for (int c = 0; c < n; ++c) {
            double step = 1.0; // kg/s; rhs is linear in q
            qp[c] = step;
            qm[c] = -step;
            sys.rhs_with_extra_injection(t, x, qp, rp);
            sys.rhs_with_extra_injection(t, x, qm, rm);
            jq.col(c) = (rp - rm) / (2.0 * step);
            qp[c] = 0.0;
            qm[c] = 0.0;
        }
        double qscale = std::max(1e-12, jq.diagonal().cwiseAbs().maxCoeff());
        double qtol = tol_scale * std::max(1.0, qscale);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (jq(i, j) < -qtol)
                    rep.input_nonneg_violations.push_back({i, j, jq(i, j), static_cast<int>(s)});
                if (i != j && std::abs(jq(i, j)) > qtol)
                    rep.input_coupling_violations.push_back({i, j, jq(i, j), static_cast<int>(s)});
                if (i == j && jq(i, j) <= qtol)
                    rep.input_coupling_violations.push_back({i, j, jq(i, j), static_cast<int>(s)});
            }
    }
    return rep;
}

CrossingClassification localize_first_crossing(const OrderReport& report, const RefinedGraph& rg) {
    require(report.first_crossing.has_value(), Errc::no_crossing, "report has no first crossing");
    const CrossingPoint& c = *report.first_crossing;
    const auto& coord = rg.coord(c.refined_vertex);
    CrossingClassification out;
    out.at_parent_node = coord.at_parent_node();
    if (out.at_parent_node) {
        out.parent_vertex = *coord.parent_vertex;
    } else {
        out.parent_edge = coord.parent_edge;
        out.arclength = coord.arclength;
    }
    return out;
}

} // namespace pipeflow
