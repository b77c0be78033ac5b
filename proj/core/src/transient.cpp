#include "pipeflow/transient.hpp"

#include "pipeflow/errors.hpp"
#include "pipeflow/steady.hpp"

#include <algorithm>
#include <cmath>

namespace pipeflow {

namespace {
const CompatSchedule kIdentity{};
}

OdeSystem::OdeSystem(std::shared_ptr<const RefinedGraph> rg, Scenario lifted,
                     std::vector<ModelPtr> parent_models, OdeSystemOptions opts)
    : rg_(std::move(rg)), scenario_(std::move(lifted)), parent_models_(std::move(parent_models)),
      opts_(opts) {
    require(opts_.eps_pert >= 0.0, Errc::bad_argument, "continuity perturbation must be >= 0");
    const MetricGraph& g = rg_->graph();
    require(parent_models_.size() == static_cast<std::size_t>(rg_->parent().edge_count()),
            Errc::missing_model, "need one dissipation model per parent edge");
    for (const auto& m : parent_models_) require(m != nullptr, Errc::missing_model, "null model");

    for (VertexId v : g.slack_set())
        require(scenario_.slack_density.count(v) != 0, Errc::unlifted_scenario,
                "scenario is not lifted onto this refinement (missing slack density at refined vertex " +
                    std::to_string(v) + ")");
    require(scenario_.compat.empty() ||
                scenario_.compat.size() == static_cast<std::size_t>(g.edge_count()),
            Errc::unlifted_scenario, "scenario compat table does not match the refined edge count");
    for (const auto& [v, fn] : scenario_.injections) {
        require(g.has_vertex(v) && !g.is_slack(v), Errc::unlifted_scenario,
                "scenario injection key is not a refined flow vertex");
        (void)fn;
    }

    const int n = g.vertex_count();
    state_index_.assign(static_cast<std::size_t>(n), -1);
    injection_.assign(static_cast<std::size_t>(n), nullptr);
    slack_fn_.assign(static_cast<std::size_t>(n), nullptr);
    adj_.resize(static_cast<std::size_t>(n));

    for (VertexId v : g.flow_set()) {
        state_index_[static_cast<std::size_t>(g.index_of(v))] = static_cast<int>(free_.size());
        free_.push_back(v);
    }
    for (const auto& [v, fn] : scenario_.injections)
        injection_[static_cast<std::size_t>(g.index_of(v))] = &fn;
    for (const auto& [v, fn] : scenario_.slack_density)
        slack_fn_[static_cast<std::size_t>(g.index_of(v))] = &fn;

    for (int vi = 0; vi < n; ++vi) {
        VertexId v = g.vertex_at(vi);
        for (int e : g.in_edges(v)) {
            const auto& ed = g.edge(e);
            const EdgeCompat* ec = scenario_.compat.empty() ? nullptr : &scenario_.compat[static_cast<std::size_t>(e)];
            adj_[static_cast<std::size_t>(vi)].push_back(
                {e, ed.tail, true, 0.5 * ed.pipe.area * ed.pipe.length, 1.0 / ed.pipe.length,
                 parent_models_[static_cast<std::size_t>(rg_->parent_edge_of(e))].get(),
                 ec ? &ec->outlet : &kIdentity, ec ? &ec->inlet : &kIdentity});
        }
        for (int e : g.out_edges(v)) {
            const auto& ed = g.edge(e);
            const EdgeCompat* ec = scenario_.compat.empty() ? nullptr : &scenario_.compat[static_cast<std::size_t>(e)];
            adj_[static_cast<std::size_t>(vi)].push_back(
                {e, ed.head, false, 0.5 * ed.pipe.area * ed.pipe.length, 1.0 / ed.pipe.length,
                 parent_models_[static_cast<std::size_t>(rg_->parent_edge_of(e))].get(),
                 ec ? &ec->inlet : &kIdentity, ec ? &ec->outlet : &kIdentity});
        }
    }
}

int OdeSystem::state_index(VertexId refined_vertex) const {
    return state_index_[static_cast<std::size_t>(rg_->graph().index_of(refined_vertex))];
}

double OdeSystem::slack_density(VertexId v, double t) const {
    const TimeFunction* fn = slack_fn_[static_cast<std::size_t>(rg_->graph().index_of(v))];
    require(fn != nullptr, Errc::bad_argument, "vertex is not slack");
    return fn->value(t);
}

Eigen::VectorXd OdeSystem::full_densities(double t, const Eigen::VectorXd& x) const {
    const MetricGraph& g = rg_->graph();
    Eigen::VectorXd rho(g.vertex_count());
    for (int vi = 0; vi < g.vertex_count(); ++vi) {
        int si = state_index_[static_cast<std::size_t>(vi)];
        rho[vi] = si >= 0 ? x[si] : slack_fn_[static_cast<std::size_t>(vi)]->value(t);
    }
    return rho;
}

double OdeSystem::net_flux_own_side(VertexId v, double t, const Eigen::VectorXd& rho_full) const {
    const MetricGraph& g = rg_->graph();
    int vi = g.index_of(v);
    double rho_v = rho_full[vi];
    double acc = 0.0;
    for (const auto& a : adj_[static_cast<std::size_t>(vi)]) {
        double a_self = a.self->value(t, rho_v);
        double a_far = a.far->value(t, rho_full[g.index_of(a.other)]);
        if (a.incoming) {
            double grad = (a_self - a_far) * a.inv_len;
            acc += -a.model->eval(t, a_self, grad); // inflow
        } else {
            double grad = (a_far - a_self) * a.inv_len;
            acc -= -a.model->eval(t, a_self, grad); // outflow
        }
    }
    return acc;
}

void OdeSystem::rhs(double t, const Eigen::VectorXd& x, Eigen::VectorXd& dxdt) const {
    rhs_with_extra_injection(t, x, Eigen::VectorXd(), dxdt);
}

void OdeSystem::rhs_with_extra_injection(double t, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& extra_q, Eigen::VectorXd& dxdt) const {
    const MetricGraph& g = rg_->graph();
    require(x.size() == dim(), Errc::bad_argument, "state dimension mismatch");
    Eigen::VectorXd rho = full_densities(t, x);
    require((rho.array() > 0.0).all(), Errc::non_positive_density,
            "nodal dynamics need strictly positive densities");
    dxdt.resize(dim());

    for (int si = 0; si < dim(); ++si) {
        VertexId v = free_[static_cast<std::size_t>(si)];
        int vi = g.index_of(v);
        double rho_v = rho[vi];

        double denom = 0.0, drift = 0.0, vol = 0.0;
        for (const auto& a : adj_[static_cast<std::size_t>(vi)]) {
            denom += a.weight * a.self->d_rho(t);
            drift += a.weight * a.self->d_t(t, rho_v);
            vol += a.weight;
        }
        double q = injection_[static_cast<std::size_t>(vi)] ? injection_[static_cast<std::size_t>(vi)]->value(t) : 0.0;
        if (extra_q.size() > 0) q += extra_q[si];
        double num = q + net_flux_own_side(v, t, rho) - drift + opts_.eps_pert * vol;
        dxdt[si] = num / denom;
    }
}

double OdeSystem::edge_flow(int e, double t, const Eigen::VectorXd& rho_full) const {
    const MetricGraph& g = rg_->graph();
    const auto& ed = g.edge(e);
    const EdgeCompat* ec = scenario_.compat.empty() ? nullptr : &scenario_.compat[static_cast<std::size_t>(e)];
    const CompatSchedule& cin = ec ? ec->inlet : kIdentity;
    const CompatSchedule& cout = ec ? ec->outlet : kIdentity;
    double a_in = cin.value(t, rho_full[g.index_of(ed.tail)]);
    double a_out = cout.value(t, rho_full[g.index_of(ed.head)]);
    double grad = (a_out - a_in) / ed.pipe.length;
    const DissipationModel& m = *parent_models_[static_cast<std::size_t>(rg_->parent_edge_of(e))];
    return -m.eval(t, a_in, grad);
}

double OdeSystem::edge_flow_headside(int e, double t, const Eigen::VectorXd& rho_full) const {
    const MetricGraph& g = rg_->graph();
    const auto& ed = g.edge(e);
    const EdgeCompat* ec = scenario_.compat.empty() ? nullptr : &scenario_.compat[static_cast<std::size_t>(e)];
    const CompatSchedule& cin = ec ? ec->inlet : kIdentity;
    const CompatSchedule& cout = ec ? ec->outlet : kIdentity;
    double a_in = cin.value(t, rho_full[g.index_of(ed.tail)]);
    double a_out = cout.value(t, rho_full[g.index_of(ed.head)]);
    double grad = (a_out - a_in) / ed.pipe.length;
    const DissipationModel& m = *parent_models_[static_cast<std::size_t>(rg_->parent_edge_of(e))];
    return -m.eval(t, a_out, grad);
}

double OdeSystem::nodal_mass(VertexId v, double t, double rho) const {
    int vi = rg_->graph().index_of(v);
    double m = 0.0;
    for (const auto& a : adj_[static_cast<std::size_t>(vi)]) m += a.weight * a.self->value(t, rho);
    return m;
}

double OdeSystem::nodal_volume(VertexId v) const {
    int vi = rg_->graph().index_of(v);
    double vol = 0.0;
    for (const auto& a : adj_[static_cast<std::size_t>(vi)]) vol += a.weight;
    return vol;
}

double OdeSystem::nodal_mass_rate(VertexId v, double t, const Eigen::VectorXd& rho_full) const {
    int vi = rg_->graph().index_of(v);
    double q = injection_[static_cast<std::size_t>(vi)] ? injection_[static_cast<std::size_t>(vi)]->value(t) : 0.0;
    return q + net_flux_own_side(v, t, rho_full) + opts_.eps_pert * nodal_volume(v);
}

double OdeSystem::realized_slack_injection(VertexId v, double t, const Eigen::VectorXd& rho_full) const {
    const TimeFunction* fn = slack_fn_[static_cast<std::size_t>(rg_->graph().index_of(v))];
    require(fn != nullptr, Errc::bad_argument, "vertex is not slack");
    int vi = rg_->graph().index_of(v);
    double rho_v = rho_full[vi];
    double rho_dot = fn->derivative(t);
    double mass_rate = 0.0;
    for (const auto& a : adj_[static_cast<std::size_t>(vi)])
        mass_rate += a.weight * (a.self->d_t(t, rho_v) + a.self->d_rho(t) * rho_dot);
    return mass_rate - net_flux_own_side(v, t, rho_full);
}

std::vector<double> OdeSystem::breakpoints(double t0, double t1) const {
    std::vector<double> out;
    for (const auto& [v, fn] : scenario_.injections) fn.collect_breakpoints(t0, t1, out);
    for (const auto& [v, fn] : scenario_.slack_density) fn.collect_breakpoints(t0, t1, out);
    for (const auto& ec : scenario_.compat) {
        if (ec.inlet.kind == CompatSchedule::Kind::multiplicative)
            ec.inlet.ratio.collect_breakpoints(t0, t1, out);
        if (ec.outlet.kind == CompatSchedule::Kind::multiplicative)
            ec.outlet.ratio.collect_breakpoints(t0, t1, out);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double Trajectory::density_at(VertexId v, double t) const {
    int si = system->state_index(v);
    if (si >= 0) return dense.component_at(si, t);
    return system->slack_density(v, t);
}

Eigen::VectorXd initial_state(const OdeSystem& sys) {
    const Scenario& s = sys.scenario();
    switch (s.initial.mode) {
        case InitialState::Mode::steady:
            return steady_init(sys);
        case InitialState::Mode::uniform: {
            require(s.initial.uniform_value > 0.0, Errc::non_positive_density,
                    "uniform initial density must be positive");
            return Eigen::VectorXd::Constant(sys.dim(), s.initial.uniform_value);
        }
        case InitialState::Mode::per_vertex: {
            Eigen::VectorXd x(sys.dim());
            for (int i = 0; i < sys.dim(); ++i) {
                VertexId v = sys.free_vertices()[static_cast<std::size_t>(i)];
                auto it = s.initial.values.find(v);
                require(it != s.initial.values.end(), Errc::vertex_mismatch,
                        "initial density missing at refined vertex " + std::to_string(v));
                require(it->second > 0.0, Errc::non_positive_density, "initial density must be positive");
                x[i] = it->second;
            }
            return x;
        }
    }
    fail(Errc::bad_argument, "unknown initial-state mode");
}

Eigen::VectorXd steady_init(const OdeSystem& sys) {
    const MetricGraph& g = sys.refined().graph();

    // Seed with the continuum steady solution of the refined graph.
    std::vector<ModelPtr> edge_models;
    edge_models.reserve(static_cast<std::size_t>(g.edge_count()));
    for (int e = 0; e < g.edge_count(); ++e)
        edge_models.push_back(sys.parent_models()[static_cast<std::size_t>(sys.refined().parent_edge_of(e))]);
    SteadyBoundary b = freeze_boundary(g, sys.scenario(), 0.0);
    SteadyState guess = solve_steady(g, edge_models, b);

    Eigen::VectorXd x(sys.dim());
    for (int i = 0; i < sys.dim(); ++i)
        x[i] = guess.density.at(sys.free_vertices()[static_cast<std::size_t>(i)]);

    // Newton to the exact fixed point of the discrete dynamics at t = 0.
    const Eigen::Index n = x.size();
    Eigen::VectorXd r(n), rp(n);
    sys.rhs(0.0, x, r);
    double r0 = std::max(r.lpNorm<Eigen::Infinity>(), 1e-300);
    for (int it = 0; it < 60; ++it) {
        double rnorm = r.lpNorm<Eigen::Infinity>();
        if (rnorm <= 1e-11 * r0 || rnorm <= 1e-16) break;
        Eigen::MatrixXd J(n, n);
        Eigen::VectorXd xp = x;
        for (Eigen::Index c = 0; c < n; ++c) {
            double step = 1e-7 * std::max(std::abs(x[c]), 1e-3);
            xp[c] = x[c] + step;
            sys.rhs(0.0, xp, rp);
            J.col(c) = (rp - r) / step;
            xp[c] = x[c];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        require(lu.isInvertible(), Errc::singular_jacobian, "singular Jacobian in steady_init");
        Eigen::VectorXd dx = lu.solve(-r);
        double alpha = 1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (x[i] + dx[i] <= 0.0) alpha = std::min(alpha, -0.9 * x[i] / dx[i]);
        Eigen::VectorXd xn;
        for (int ls = 0; ls < 10; ++ls) {
            xn = x + alpha * dx;
            sys.rhs(0.0, xn, rp);
            if (rp.lpNorm<Eigen::Infinity>() < rnorm) break;
            alpha *= 0.5;
        }
        if ((xn - x).lpNorm<Eigen::Infinity>() <= 1e-13 * x.lpNorm<Eigen::Infinity>()) {
            x = xn;
            sys.rhs(0.0, x, r);
            break;
        }
        x = xn;
        sys.rhs(0.0, x, r);
    }
    return x;
}

namespace {

// Simpson quadrature of fn over [a, b] with 8 panels.
template <class F>
double simpson(F&& fn, double a, double b) {
    const int panels = 8;
    double h = (b - a) / panels;
    double acc = fn(a) + fn(b);
    for (int k = 1; k < panels; ++k) acc += (k % 2 ? 4.0 : 2.0) * fn(a + k * h);
    return acc * h / 3.0;
}

} // namespace

Trajectory integrate(std::shared_ptr<const OdeSystem> sys, const Eigen::VectorXd& x0,
                     const IntegrateOptions& opts) {
    const OdeSystem& s = *sys;
    const MetricGraph& g = s.refined().graph();
    const double T = s.scenario().horizon;

    std::vector<double> out_times = opts.output_times;
    if (out_times.empty()) {
        double dt = opts.output_dt > 0.0 ? opts.output_dt : T / 200.0;
        for (double t = 0.0; t < T - 1e-9 * T; t += dt) out_times.push_back(t);
        out_times.push_back(T);
    }
    double t0 = out_times.front();
    double t1 = out_times.back();

    OdeOptions oo;
    oo.rtol = opts.rtol;
    oo.atol = opts.atol;
    oo.max_steps = opts.max_steps;
    oo.enforce_positive = true;
    oo.forced_times = s.breakpoints(t0, t1);
    for (double t : opts.extra_forced_times)
        if (t > t0 && t < t1) oo.forced_times.push_back(t);

    OdeRhs rhs = [&s](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
        s.rhs(t, y, dydt);
    };

    Trajectory traj;
    traj.system = sys;
    traj.epsilon = s.refined().epsilon();
    traj.dense = TrBdf2(oo).integrate(rhs, x0, t0, t1);
    traj.stats = traj.dense.stats;
    traj.times = out_times;

    const int nv = g.vertex_count();
    const int ne = g.edge_count();
    const int nt = static_cast<int>(out_times.size());
    traj.density.resize(nv, nt);
    traj.edge_flow.resize(ne, nt);
    for (VertexId v : g.slack_set()) traj.realized_slack_injection[v].resize(static_cast<std::size_t>(nt));

    for (int k = 0; k < nt; ++k) {
        double t = out_times[static_cast<std::size_t>(k)];
        Eigen::VectorXd x = traj.dense.at(t);
        Eigen::VectorXd rho = s.full_densities(t, x);
        traj.density.col(k) = rho;
        for (int e = 0; e < ne; ++e) traj.edge_flow(e, k) = s.edge_flow(e, t, rho);
        for (VertexId v : g.slack_set())
            traj.realized_slack_injection[v][static_cast<std::size_t>(k)] =
                s.realized_slack_injection(v, t, rho);
    }

    if (opts.audit) {
        auto rho_of = [&](double t) { return s.full_densities(t, traj.dense.at(t)); };
        double throughput = 0.0;
        {
            auto absq = [&](double t) {
                Eigen::VectorXd rho = rho_of(t);
                double acc = 0.0;
                for (VertexId v : g.flow_set()) acc += std::abs(s.scenario().injection(v).value(t));
                for (VertexId v : g.slack_set()) acc += std::abs(s.realized_slack_injection(v, t, rho));
                return acc;
            };
            for (int k = 0; k + 1 < nt; ++k)
                throughput += simpson(absq, out_times[static_cast<std::size_t>(k)],
                                      out_times[static_cast<std::size_t>(k + 1)]);
        }
        traj.audit.throughput = throughput;
        double denom = std::max(throughput, 1.0);

        double worst_node = 0.0;
        for (int k = 0; k + 1 < nt; ++k) {
            double ta = out_times[static_cast<std::size_t>(k)];
            double tb = out_times[static_cast<std::size_t>(k + 1)];
            Eigen::VectorXd xa = traj.dense.at(ta), xb = traj.dense.at(tb);
            Eigen::VectorXd ra = s.full_densities(ta, xa), rb = s.full_densities(tb, xb);
            for (VertexId v : g.flow_set()) {
                int vi = g.index_of(v);
                double dm = s.nodal_mass(v, tb, rb[vi]) - s.nodal_mass(v, ta, ra[vi]);
                double in = simpson([&](double t) { return s.nodal_mass_rate(v, t, rho_of(t)); }, ta, tb);
                worst_node = std::max(worst_node, std::abs(dm - in));
            }
        }
        traj.audit.per_node_rel = worst_node / denom;

        // Network total: mass change vs integrated injections (data + realized).
        {
            double dm_total = 0.0;
            Eigen::VectorXd xa = traj.dense.at(t0), xb = traj.dense.at(t1);
            Eigen::VectorXd ra = s.full_densities(t0, xa), rb = s.full_densities(t1, xb);
            for (VertexId v : g.vertices()) {
                int vi = g.index_of(v);
                dm_total += s.nodal_mass(v, t1, rb[vi]) - s.nodal_mass(v, t0, ra[vi]);
            }
            double qint = 0.0;
            auto net = [&](double t) {
                Eigen::VectorXd rho = rho_of(t);
                double acc = 0.0;
                for (VertexId v : g.flow_set())
                    acc += s.scenario().injection(v).value(t) + s.eps_pert() * s.nodal_volume(v);
                for (VertexId v : g.slack_set()) acc += s.realized_slack_injection(v, t, rho);
                return acc;
            };
            for (int k = 0; k + 1 < nt; ++k)
                qint += simpson(net, out_times[static_cast<std::size_t>(k)],
                                out_times[static_cast<std::size_t>(k + 1)]);
            traj.audit.global_rel = std::abs(dm_total - qint) / denom;
        }
    }
    return traj;
}

Trajectory simulate(const MetricGraph& g, const std::vector<ModelPtr>& models, const Scenario& s,
                    double epsilon, const IntegrateOptions& opts, const OdeSystemOptions& sys_opts) {
    validate_scenario(g, s);
    auto rg = std::make_shared<RefinedGraph>(refine(g, epsilon));
    Scenario lifted = lift_scenario(s, *rg);
    auto sys = std::make_shared<OdeSystem>(rg, std::move(lifted), models, sys_opts);
    Eigen::VectorXd x0 = initial_state(*sys);
    return integrate(sys, x0, opts);
}

} // namespace pipeflow
