#include "pipeflow/steady.hpp"

#include "pipeflow/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pipeflow {

SteadyBoundary freeze_boundary(const MetricGraph& g, const Scenario& s, double t) {
    SteadyBoundary b;
    for (VertexId v : g.flow_set()) b.injection[v] = s.injection(v).value(t);
    for (VertexId v : g.slack_set()) b.slack_density[v] = s.slack_density.at(v).value(t);
    if (!s.compat.empty()) {
        b.compat.resize(s.compat.size());
        for (std::size_t e = 0; e < s.compat.size(); ++e) {
            b.compat[e].inlet = s.compat[e].inlet.d_rho(t);
            b.compat[e].outlet = s.compat[e].outlet.d_rho(t);
        }
    }
    return b;
}

namespace {

// Solves f(rho, v) = -phi for the gradient v (f strictly increasing in v).
double invert_gradient(const DissipationModel& m, double rho, double phi) {
    double target = -phi;
    double lo = -1.0, hi = 1.0;
    auto val = [&](double v) { return m.eval(0.0, rho, v); };
    int guard = 0;
    while (val(lo) > target) {
        lo *= 4.0;
        require(++guard < 400, Errc::non_convergence, "gradient inversion bracket failed (low)");
    }
    guard = 0;
    while (val(hi) < target) {
        hi *= 4.0;
        require(++guard < 400, Errc::non_convergence, "gradient inversion bracket failed (high)");
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (val(mid) < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-15 * std::max(1.0, std::abs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

// One adaptive RK4 pass of rho' = v(rho) over [0, length], sampling at xs
// (sorted). Used for closures without a potential structure.
std::vector<double> integrate_edge_ode(const DissipationModel& m, double phi, double rho_in,
                                       double length, const std::vector<double>& xs) {
    std::vector<double> out;
    out.reserve(xs.size());
    auto slope = [&](double rho) {
        require(rho > 0.0, Errc::density_cavitation, "edge profile left the positive densities");
        return invert_gradient(m, rho, phi);
    };
    double x = 0.0, rho = rho_in;
    std::size_t next = 0;
    while (next < xs.size() && xs[next] <= 0.0) {
        out.push_back(rho_in);
        ++next;
    }
    double h = length / 64.0;
    const double hmin = length * 1e-10;
    while (x < length && next < xs.size()) {
        double target = xs[next];
        double step = std::min(h, target - x);
        if (step <= 0.0) {
            out.push_back(rho);
            ++next;
            continue;
        }
        // RK4 with step doubling for error control.
        auto rk4 = [&](double r0, double dx) {
            double k1 = slope(r0);
            double k2 = slope(r0 + 0.5 * dx * k1);
            double k3 = slope(r0 + 0.5 * dx * k2);
            double k4 = slope(r0 + dx * k3);
            return r0 + dx / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        };
        double full = rk4(rho, step);
        double half = rk4(rk4(rho, 0.5 * step), 0.5 * step);
        double err = std::abs(full - half);
        double tol = 1e-12 * std::max(1.0, std::abs(rho));
        if (err > tol && step > hmin) {
            h = std::max(hmin, 0.5 * step);
            continue;
        }
        rho = half;
        x += step;
        if (err < 0.1 * tol) h = std::min(length, 2.0 * h);
        if (x >= target - 1e-9 * length) {
            out.push_back(rho);
            ++next;
        }
    }
    while (next < xs.size()) {
        out.push_back(rho);
        ++next;
    }
    return out;
}

double shoot_edge_flow(const DissipationModel& m, double rho_in, double rho_out, double length) {
    auto outlet = [&](double phi) {
        return integrate_edge_ode(m, phi, rho_in, length, {length}).front();
    };
    // rho(L) decreases in phi; bracket the root.
    double lo = 0.0, hi = 0.0;
    double probe = 1.0;
    int guard = 0;
    while (outlet(probe) > rho_out) {
        probe *= 4.0;
        require(++guard < 100, Errc::non_convergence, "edge shooting bracket failed (high)");
    }
    hi = probe;
    probe = -1.0;
    guard = 0;
    while (outlet(probe) < rho_out) {
        probe *= 4.0;
        require(++guard < 100, Errc::non_convergence, "edge shooting bracket failed (low)");
    }
    lo = probe;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (outlet(mid) > rho_out)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-13 * std::max(1.0, std::abs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace

double steady_edge_flow(const DissipationModel& m, double rho_in, double rho_out, double length) {
    require(rho_in > 0.0 && rho_out > 0.0, Errc::non_positive_density,
            "steady edge endpoints must be positive");
    if (const PotentialForm* pf = m.potential())
        return pf->g((pf->h(rho_in) - pf->h(rho_out)) / length);
    return shoot_edge_flow(m, rho_in, rho_out, length);
}

std::vector<double> steady_edge_densities(const DissipationModel& m, double phi, double rho_in,
                                          double length, const std::vector<double>& xs) {
    if (const PotentialForm* pf = m.potential()) {
        SteadyEdgeProfile profile(*pf, phi, rho_in, length);
        std::vector<double> out;
        out.reserve(xs.size());
        for (double x : xs) out.push_back(profile(x));
        return out;
    }
    return integrate_edge_ode(m, phi, rho_in, length, xs);
}

namespace {

struct Workspace {
    const MetricGraph& g;
    const std::vector<ModelPtr>& models;
    const SteadyBoundary& b;
    std::vector<int> unknown_of_vertex; // dense vertex index -> unknown slot, -1 for slack
    std::vector<VertexId> unknown_vertex;

    double nodal_density(VertexId v, const Eigen::VectorXd& x) const {
        int ui = unknown_of_vertex[static_cast<std::size_t>(g.index_of(v))];
        return ui >= 0 ? x[ui] : b.slack_density.at(v);
    }

    double edge_flow(int e, const Eigen::VectorXd& x) const {
        const auto& ed = g.edge(e);
        auto fc = b.compat_at(e);
        double rho_in = fc.inlet * nodal_density(ed.tail, x);
        double rho_out = fc.outlet * nodal_density(ed.head, x);
        return steady_edge_flow(*models[static_cast<std::size_t>(e)], rho_in, rho_out, ed.pipe.length);
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& x, std::vector<double>* flows_out = nullptr) const {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(unknown_vertex.size()));
        std::vector<double> flows(static_cast<std::size_t>(g.edge_count()));
        for (int e = 0; e < g.edge_count(); ++e) flows[static_cast<std::size_t>(e)] = edge_flow(e, x);
        for (std::size_t ui = 0; ui < unknown_vertex.size(); ++ui) {
            VertexId v = unknown_vertex[ui];
            double acc = b.injection_at(v);
            for (int e : g.in_edges(v)) acc += flows[static_cast<std::size_t>(e)];
            for (int e : g.out_edges(v)) acc -= flows[static_cast<std::size_t>(e)];
            r[static_cast<Eigen::Index>(ui)] = acc;
        }
        if (flows_out) *flows_out = std::move(flows);
        return r;
    }
};

} // namespace

SteadyState solve_steady(const MetricGraph& g, const std::vector<ModelPtr>& models,
                         const SteadyBoundary& b, const SteadyOptions& opts) {
    require(models.size() == static_cast<std::size_t>(g.edge_count()), Errc::missing_model,
            "need one dissipation model per edge");
    for (const auto& m : models) require(m != nullptr, Errc::missing_model, "null dissipation model");
    for (VertexId v : g.slack_set())
        require(b.slack_density.count(v) != 0, Errc::vertex_mismatch,
                "missing slack density at vertex " + std::to_string(v));

    Workspace w{g, models, b, {}, {}};
    w.unknown_of_vertex.assign(static_cast<std::size_t>(g.vertex_count()), -1);
    for (VertexId v : g.flow_set()) {
        w.unknown_of_vertex[static_cast<std::size_t>(g.index_of(v))] = static_cast<int>(w.unknown_vertex.size());
        w.unknown_vertex.push_back(v);
    }
    const auto n = static_cast<Eigen::Index>(w.unknown_vertex.size());

    double mean_slack = 0.0;
    for (const auto& [v, rho] : b.slack_density) {
        require(rho > 0.0, Errc::non_positive_density, "slack density must be positive");
        mean_slack += rho;
    }
    mean_slack /= static_cast<double>(b.slack_density.size());

    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, mean_slack);
    for (Eigen::Index ui = 0; ui < n; ++ui) {
        auto it = opts.initial_guess.find(w.unknown_vertex[static_cast<std::size_t>(ui)]);
        if (it != opts.initial_guess.end()) x[ui] = it->second;
    }

    double qmax = 0.0;
    for (const auto& [v, q] : b.injection) qmax = std::max(qmax, std::abs(q));
    const double tol_abs = opts.tol_balance_rel * std::max(1.0, qmax);

    // Flows go like the square root of the potential drop, so density
    // roundoff sets a floor on the reachable balance residual of edges whose
    // drop is near zero. Estimate it from the current iterate.
    auto flow_floor = [&](const Eigen::VectorXd& xc) {
        double fl = 0.0;
        for (int e = 0; e < g.edge_count(); ++e) {
            const DissipationModel& m = *models[static_cast<std::size_t>(e)];
            const PotentialForm* pf = m.potential();
            if (!pf) continue;
            const auto& ed = g.edge(e);
            auto fc = b.compat_at(e);
            double psi_in = pf->h(fc.inlet * w.nodal_density(ed.tail, xc));
            double psi_out = pf->h(fc.outlet * w.nodal_density(ed.head, xc));
            double y = std::abs(psi_in - psi_out) / ed.pipe.length;
            double dy = (std::abs(psi_in) + std::abs(psi_out)) * 4.0 *
                        std::numeric_limits<double>::epsilon() / ed.pipe.length;
            fl = std::max(fl, pf->g(y + dy) - pf->g(y));
        }
        return 4.0 * fl;
    };

    std::vector<double> flows;
    Eigen::VectorXd r = w.residual(x, &flows);
    int iter = 0;
    bool converged = false;
    for (; iter < opts.max_iterations; ++iter) {
        double rnorm = r.lpNorm<Eigen::Infinity>();
        if (rnorm <= std::max(tol_abs, 2.0 * flow_floor(x))) {
            converged = true;
            break;
        }
        require((x.array() > 0.0).all(), Errc::density_cavitation,
                "Newton iterate left the positive densities");

        // Jacobian by central differences of the per-edge flow, scattered into
        // the two endpoint balance rows.
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
        for (int e = 0; e < g.edge_count(); ++e) {
            const auto& ed = g.edge(e);
            int ut = w.unknown_of_vertex[static_cast<std::size_t>(g.index_of(ed.tail))];
            int uh = w.unknown_of_vertex[static_cast<std::size_t>(g.index_of(ed.head))];
            for (int side = 0; side < 2; ++side) {
                int ui = side == 0 ? ut : uh;
                if (ui < 0) continue;
                double step = 1e-7 * std::max(1.0, std::abs(x[ui]));
                Eigen::VectorXd xp = x, xm = x;
                xp[ui] += step;
                xm[ui] = std::max(xm[ui] - step, 0.5 * xm[ui]);
                double d = (w.edge_flow(e, xp) - w.edge_flow(e, xm)) / (xp[ui] - xm[ui]);
                if (uh >= 0) J(uh, ui) += d;
                if (ut >= 0) J(ut, ui) -= d;
            }
        }

        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        require(lu.isInvertible(), Errc::singular_jacobian, "singular steady Jacobian");
        Eigen::VectorXd dx = lu.solve(-r);

        // Keep iterates positive and damp on residual growth.
        double alpha = 1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (x[i] + dx[i] <= 0.0) alpha = std::min(alpha, -0.9 * x[i] / dx[i]);
        Eigen::VectorXd xn;
        Eigen::VectorXd rn;
        double rn_norm = std::numeric_limits<double>::infinity();
        for (int ls = 0; ls < 12; ++ls) {
            xn = x + alpha * dx;
            rn = w.residual(xn);
            rn_norm = rn.lpNorm<Eigen::Infinity>();
            if (rn_norm < rnorm || rn_norm <= std::max(tol_abs, 2.0 * flow_floor(xn))) break;
            alpha *= 0.5;
        }
        double step_norm = (alpha * dx).lpNorm<Eigen::Infinity>() / std::max(1.0, x.lpNorm<Eigen::Infinity>());
        x = xn;
        r = w.residual(x, &flows);
        if (step_norm <= opts.tol_step) {
            converged = r.lpNorm<Eigen::Infinity>() <= std::max(tol_abs, 4.0 * flow_floor(x));
            ++iter;
            break;
        }
    }
    if (!converged)
        fail(Errc::non_convergence,
             "steady Newton stopped at residual " + std::to_string(r.lpNorm<Eigen::Infinity>()));

    SteadyState st;
    st.newton_iterations = iter;
    st.balance_residual = r.lpNorm<Eigen::Infinity>();
    r = w.residual(x, &flows);
    st.edge_flow = flows;
    for (VertexId v : g.vertices()) st.density[v] = w.nodal_density(v, x);
    for (VertexId v : g.slack_set()) {
        double q = 0.0;
        for (int e : g.out_edges(v)) q += flows[static_cast<std::size_t>(e)];
        for (int e : g.in_edges(v)) q -= flows[static_cast<std::size_t>(e)];
        st.realized_injection[v] = q;
    }

    double edge_res = 0.0;
    for (int e = 0; e < g.edge_count(); ++e) {
        const DissipationModel& m = *models[static_cast<std::size_t>(e)];
        const PotentialForm* pf = m.potential();
        if (!pf) continue;
        const auto& ed = g.edge(e);
        auto fc = b.compat_at(e);
        double rho_in = fc.inlet * st.density.at(ed.tail);
        double rho_out = fc.outlet * st.density.at(ed.head);
        double lhs = pf->g_inverse(flows[static_cast<std::size_t>(e)]) * ed.pipe.length;
        double rhs = pf->h(rho_in) - pf->h(rho_out);
        edge_res = std::max(edge_res, std::abs(lhs - rhs) / std::max({std::abs(pf->h(rho_in)), 1.0}));
    }
    st.edge_residual = edge_res;
    return st;
}

SteadyOrderVerdict verify_theorem1(const MetricGraph& g, const std::vector<ModelPtr>& models,
                                   const SteadyBoundary& b1, const SteadyBoundary& b2, double tol,
                                   int interior_samples, const SteadyOptions& opts) {
    for (VertexId v : g.flow_set())
        require(b1.injection_at(v) >= b2.injection_at(v), Errc::hypothesis_violated,
                "injections not ordered at vertex " + std::to_string(v));
    for (VertexId v : g.slack_set())
        require(b1.slack_density.at(v) >= b2.slack_density.at(v), Errc::hypothesis_violated,
                "slack densities not ordered at vertex " + std::to_string(v));
    require(b1.compat.size() == b2.compat.size(), Errc::hypothesis_violated,
            "compat tables must match");
    for (std::size_t e = 0; e < b1.compat.size(); ++e)
        require(b1.compat[e].inlet == b2.compat[e].inlet && b1.compat[e].outlet == b2.compat[e].outlet,
                Errc::hypothesis_violated, "theorem 1 check requires shared compatibility ratios");

    SteadyState s1 = solve_steady(g, models, b1, opts);
    SteadyState s2 = solve_steady(g, models, b2, opts);

    SteadyOrderVerdict verdict;
    verdict.worst_margin = std::numeric_limits<double>::infinity();
    for (VertexId v : g.vertices()) {
        double m = s1.density.at(v) - s2.density.at(v);
        if (m < verdict.worst_margin) {
            verdict.worst_margin = m;
            verdict.worst_vertex = v;
            verdict.worst_interior.reset();
        }
    }
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& ed = g.edge(e);
        std::vector<double> xs;
        for (int k = 1; k <= interior_samples; ++k)
            xs.push_back(ed.pipe.length * k / (interior_samples + 1.0));
        auto prof = [&](const SteadyState& st, const SteadyBoundary& b) {
            double rho_in = b.compat_at(e).inlet * st.density.at(ed.tail);
            return steady_edge_densities(*models[static_cast<std::size_t>(e)],
                                         st.edge_flow[static_cast<std::size_t>(e)], rho_in,
                                         ed.pipe.length, xs);
        };
        auto p1 = prof(s1, b1);
        auto p2 = prof(s2, b2);
        for (std::size_t k = 0; k < xs.size(); ++k) {
            double m = p1[k] - p2[k];
            if (m < verdict.worst_margin) {
                verdict.worst_margin = m;
                verdict.worst_vertex = ed.tail;
                verdict.worst_interior = {e, xs[k]};
            }
        }
    }
    verdict.ordered = verdict.worst_margin >= -tol;
    return verdict;
}

UniquenessReport uniqueness_probe(const MetricGraph& g, const std::vector<ModelPtr>& models,
                                  const SteadyBoundary& b, int n_starts, std::uint64_t seed,
                                  const SteadyOptions& opts) {
    require(n_starts >= 2, Errc::bad_argument, "uniqueness probe needs at least two starts");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale(0.6, 1.6);

    double mean_slack = 0.0;
    for (const auto& [v, rho] : b.slack_density) mean_slack += rho;
    mean_slack /= static_cast<double>(b.slack_density.size());

    UniquenessReport rep;
    std::vector<SteadyState> states;
    for (int s = 0; s < n_starts; ++s) {
        SteadyOptions o = opts;
        if (s > 0) {
            o.initial_guess.clear();
            for (VertexId v : g.flow_set()) o.initial_guess[v] = mean_slack * scale(rng);
        }
        try {
            states.push_back(solve_steady(g, models, b, o));
            ++rep.converged;
        } catch (const Error& e) {
            if (e.code() != Errc::non_convergence && e.code() != Errc::density_cavitation) throw;
            ++rep.failed;
        }
    }
    for (std::size_t a = 0; a < states.size(); ++a)
        for (std::size_t c = a + 1; c < states.size(); ++c)
            for (VertexId v : g.vertices()) {
                double d = std::abs(states[a].density.at(v) - states[c].density.at(v)) /
                           std::max(1.0, std::abs(states[a].density.at(v)));
                rep.max_rel_deviation = std::max(rep.max_rel_deviation, d);
            }
    return rep;
}

std::vector<VertexId> aquarius_path(const MetricGraph& g, const std::vector<double>& flows1,
                                    const std::vector<double>& flows2, const std::set<VertexId>& s_set,
                                    VertexId target) {
    require(flows1.size() == static_cast<std::size_t>(g.edge_count()) && flows1.size() == flows2.size(),
            Errc::bad_argument, "flow vectors must be indexed like the edges");
    require(s_set.count(target) != 0, Errc::bad_argument, "target vertex must lie in the ordered set");

    // Skew-symmetric access: phi_vj for the oriented pair (v, j).
    auto flow_pair = [&](VertexId v, VertexId j, const std::vector<double>& flows) {
        if (auto e = g.find_edge(v, j)) return flows[static_cast<std::size_t>(*e)];
        if (auto e = g.find_edge(j, v)) return -flows[static_cast<std::size_t>(*e)];
        fail(Errc::bad_argument, "no edge between path vertices");
    };

    std::map<VertexId, VertexId> pred; // BFS tree toward target
    std::set<VertexId> visited{target};
    std::vector<VertexId> frontier{target};

    while (!frontier.empty()) {
        std::vector<VertexId> next;
        for (VertexId j : frontier) {
            auto consider = [&](VertexId v) {
                if (visited.count(v)) return;
                double f1 = flow_pair(v, j, flows1);
                double f2 = flow_pair(v, j, flows2);
                double slack = 1e-12 * std::max({1.0, std::abs(f1), std::abs(f2)});
                if (f1 <= f2 + slack) {
                    visited.insert(v);
                    pred[v] = j;
                    next.push_back(v);
                }
            };
            for (int e : g.in_edges(j)) consider(g.edge(e).tail);
            for (int e : g.out_edges(j)) consider(g.edge(e).head);
        }
        for (VertexId v : next) {
            if (!s_set.count(v)) {
                std::vector<VertexId> path{v};
                VertexId cur = v;
                while (cur != target) {
                    cur = pred.at(cur);
                    path.push_back(cur);
                }
                return path;
            }
        }
        frontier = std::move(next);
    }
    fail(Errc::path_not_found,
         "no ordered path found; flows are not balanced or the ordering hypothesis fails");
}

} // namespace pipeflow
