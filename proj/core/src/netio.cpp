#include "pipeflow/netio.hpp"

#include "pipeflow/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <optional>

namespace pipeflow {

using nlohmann::json;

namespace {

json read_json(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(Errc::parse_error, path + ": " + e.what());
    }
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    require(out.good(), Errc::io_error, "cannot write " + path);
    out << j.dump(2) << "\n";
}

json timefunc_to_json(const TimeFunction& fn) {
    struct V {
        json operator()(const TimeFunction::Constant& c) const {
            return json{{"type", "constant"}, {"value", c.value}};
        }
        json operator()(const TimeFunction::Sinusoid& s) const {
            return json{{"type", "sinusoid"},
                        {"offset", s.offset},
                        {"amplitude", s.amplitude},
                        {"period_s", s.period},
                        {"phase_rad", s.phase}};
        }
        json operator()(const TimeFunction::PiecewiseLinear& p) const {
            return json{{"type", "piecewise_linear"}, {"t_s", p.t}, {"v", p.v}};
        }
        json operator()(const TimeFunction::Switched& s) const {
            return json{{"type", "switched"},
                        {"t_switch_s", s.t_switch},
                        {"before", timefunc_to_json(*s.before)},
                        {"after", timefunc_to_json(*s.after)}};
        }
    };
    return std::visit(V{}, fn.node());
}

TimeFunction timefunc_from_json(const json& j) {
    require(j.is_object() && j.contains("type"), Errc::parse_error, "time function needs a type");
    std::string type = j.at("type").get<std::string>();
    try {
        if (type == "constant") return TimeFunction::constant(j.at("value").get<double>());
        if (type == "sinusoid")
            return TimeFunction::sinusoid(j.at("offset").get<double>(), j.at("amplitude").get<double>(),
                                          j.at("period_s").get<double>(),
                                          j.value("phase_rad", 0.0));
        if (type == "piecewise_linear")
            return TimeFunction::piecewise_linear(j.at("t_s").get<std::vector<double>>(),
                                                  j.at("v").get<std::vector<double>>());
        if (type == "switched")
            return TimeFunction::switched(j.at("t_switch_s").get<double>(),
                                          timefunc_from_json(j.at("before")),
                                          timefunc_from_json(j.at("after")));
    } catch (const json::exception& e) {
        fail(Errc::parse_error, std::string("bad time function: ") + e.what());
    }
    fail(Errc::parse_error, "unknown time function type '" + type + "'");
}

std::map<VertexId, TimeFunction> vertex_map_from_json(const json& j) {
    std::map<VertexId, TimeFunction> out;
    for (auto it = j.begin(); it != j.end(); ++it)
        out[std::stoi(it.key())] = timefunc_from_json(it.value());
    return out;
}

json vertex_map_to_json(const std::map<VertexId, TimeFunction>& m) {
    json j = json::object();
    for (const auto& [v, fn] : m) j[std::to_string(v)] = timefunc_to_json(fn);
    return j;
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

} // namespace

Network load_network(const std::string& path) {
    json j = read_json(path);
    try {
        std::vector<VertexId> vertices = j.at("vertices").get<std::vector<VertexId>>();
        std::vector<VertexId> slack = j.at("slack").get<std::vector<VertexId>>();
        std::vector<EdgeSpec> edges;
        std::vector<ModelPtr> models;
        for (const json& je : j.at("edges")) {
            EdgeSpec e;
            e.tail = je.at("from").get<VertexId>();
            e.head = je.at("to").get<VertexId>();
            e.pipe.length = je.at("length_m").get<double>();
            e.pipe.diameter = je.at("diameter_m").get<double>();
            e.pipe.friction = je.at("friction").get<double>();
            e.pipe.area = je.value("area_m2", PipeGeometry::circular_area(e.pipe.diameter));
            const json& jc = je.at("closure");
            std::string type = jc.at("type").get<std::string>();
            require(type == "ideal_gas", Errc::parse_error,
                    "unknown closure type '" + type + "' (custom closures are registered in code)");
            GasConstants gas;
            gas.R = jc.value("R", gas.R);
            gas.T = jc.value("T", gas.T);
            gas.Z = jc.value("Z", gas.Z);
            models.push_back(std::make_shared<IdealGasClosure>(gas, e.pipe));
            edges.push_back(e);
        }
        Network net{j.value("title", ""), MetricGraph::build(vertices, edges, slack), std::move(models)};
        return net;
    } catch (const json::exception& e) {
        fail(Errc::parse_error, path + ": " + e.what());
    }
}

void save_network(const std::string& path, const Network& net) {
    json j;
    if (!net.title.empty()) j["title"] = net.title;
    j["vertices"] = net.graph.vertices();
    j["slack"] = net.graph.slack_set();
    json edges = json::array();
    for (int e = 0; e < net.graph.edge_count(); ++e) {
        const auto& ed = net.graph.edge(e);
        json je{{"from", ed.tail},          {"to", ed.head},
                {"length_m", ed.pipe.length}, {"diameter_m", ed.pipe.diameter},
                {"friction", ed.pipe.friction}, {"area_m2", ed.pipe.area}};
        auto gasmodel = std::dynamic_pointer_cast<const IdealGasClosure>(net.models[static_cast<std::size_t>(e)]);
        require(gasmodel != nullptr, Errc::bad_argument, "only ideal_gas closures are serializable");
        je["closure"] = json{{"type", "ideal_gas"},
                             {"R", gasmodel->gas().R},
                             {"T", gasmodel->gas().T},
                             {"Z", gasmodel->gas().Z}};
        edges.push_back(je);
    }
    j["edges"] = edges;
    write_json(path, j);
}

Scenario load_scenario(const std::string& path, const MetricGraph& g) {
    json j = read_json(path);
    try {
        Scenario s;
        s.horizon = j.at("horizon_s").get<double>();
        if (j.contains("injections_kg_per_s"))
            s.injections = vertex_map_from_json(j.at("injections_kg_per_s"));
        s.slack_density = vertex_map_from_json(j.at("slack_density_kg_per_m3"));
        if (j.contains("compressions")) {
            s.compat.assign(static_cast<std::size_t>(g.edge_count()), EdgeCompat{});
            for (const json& jc : j.at("compressions")) {
                VertexId from = jc.at("from").get<VertexId>();
                VertexId to = jc.at("to").get<VertexId>();
                auto e = g.find_edge(from, to);
                require(e.has_value(), Errc::parse_error,
                        "compression on unknown edge " + std::to_string(from) + "->" + std::to_string(to));
                std::string end = jc.at("end").get<std::string>();
                require(end == "inlet" || end == "outlet", Errc::parse_error,
                        "compression end must be 'inlet' or 'outlet'");
                CompatSchedule cs = CompatSchedule::multiplicative(timefunc_from_json(jc.at("ratio")));
                if (end == "inlet")
                    s.compat[static_cast<std::size_t>(*e)].inlet = cs;
                else
                    s.compat[static_cast<std::size_t>(*e)].outlet = cs;
            }
        }
        const json& ji = j.at("initial_state");
        if (ji.is_string()) {
            require(ji.get<std::string>() == "steady", Errc::parse_error,
                    "initial_state string must be 'steady'");
            s.initial = InitialState::steady();
        } else if (ji.contains("uniform_kg_per_m3")) {
            s.initial = InitialState::uniform(ji.at("uniform_kg_per_m3").get<double>());
        } else {
            std::map<VertexId, double> vals;
            for (auto it = ji.at("per_vertex_kg_per_m3").begin(); it != ji.at("per_vertex_kg_per_m3").end(); ++it)
                vals[std::stoi(it.key())] = it.value().get<double>();
            s.initial = InitialState::per_vertex(std::move(vals));
        }
        validate_scenario(g, s);
        return s;
    } catch (const json::exception& e) {
        fail(Errc::parse_error, path + ": " + e.what());
    }
}

void save_scenario(const std::string& path, const MetricGraph& g, const Scenario& s) {
    json j;
    j["horizon_s"] = s.horizon;
    j["injections_kg_per_s"] = vertex_map_to_json(s.injections);
    j["slack_density_kg_per_m3"] = vertex_map_to_json(s.slack_density);
    if (!s.compat.empty()) {
        json arr = json::array();
        for (std::size_t e = 0; e < s.compat.size(); ++e) {
            const auto& ed = g.edge(static_cast<int>(e));
            if (s.compat[e].inlet.kind == CompatSchedule::Kind::multiplicative)
                arr.push_back(json{{"from", ed.tail},
                                   {"to", ed.head},
                                   {"end", "inlet"},
                                   {"ratio", timefunc_to_json(s.compat[e].inlet.ratio)}});
            if (s.compat[e].outlet.kind == CompatSchedule::Kind::multiplicative)
                arr.push_back(json{{"from", ed.tail},
                                   {"to", ed.head},
                                   {"end", "outlet"},
                                   {"ratio", timefunc_to_json(s.compat[e].outlet.ratio)}});
        }
        j["compressions"] = arr;
    }
    switch (s.initial.mode) {
        case InitialState::Mode::steady:
            j["initial_state"] = "steady";
            break;
        case InitialState::Mode::uniform:
            j["initial_state"] = json{{"uniform_kg_per_m3", s.initial.uniform_value}};
            break;
        case InitialState::Mode::per_vertex: {
            json jv = json::object();
            for (const auto& [v, rho] : s.initial.values) jv[std::to_string(v)] = rho;
            j["initial_state"] = json{{"per_vertex_kg_per_m3", jv}};
            break;
        }
    }
    write_json(path, j);
}

Envelope load_envelope(const std::string& path) {
    json j = read_json(path);
    try {
        Envelope env;
        env.upper = vertex_map_from_json(j.at("upper_kg_per_s"));
        env.lower = vertex_map_from_json(j.at("lower_kg_per_s"));
        env.rho_min = j.at("rho_min_kg_per_m3").get<double>();
        env.rho_max = j.at("rho_max_kg_per_m3").get<double>();
        return env;
    } catch (const json::exception& e) {
        fail(Errc::parse_error, path + ": " + e.what());
    }
}

void save_envelope(const std::string& path, const Envelope& env) {
    json j;
    j["upper_kg_per_s"] = vertex_map_to_json(env.upper);
    j["lower_kg_per_s"] = vertex_map_to_json(env.lower);
    j["rho_min_kg_per_m3"] = env.rho_min;
    j["rho_max_kg_per_m3"] = env.rho_max;
    write_json(path, j);
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj, const Network& net) {
    std::ofstream out(path);
    require(out.good(), Errc::io_error, "cannot write " + path);
    const RefinedGraph& rg = traj.refined();
    const MetricGraph& g = rg.graph();

    // A pressure column per parent vertex when all edges share one wave speed.
    double cs2_value = 0.0;
    bool uniform = !net.models.empty();
    for (const auto& m : net.models) {
        auto gm = std::dynamic_pointer_cast<const IdealGasClosure>(m);
        if (!gm) {
            uniform = false;
            break;
        }
        if (cs2_value == 0.0)
            cs2_value = gm->gas().cs2();
        else if (std::abs(cs2_value - gm->gas().cs2()) > 1e-9 * cs2_value)
            uniform = false;
    }
    const bool cs2 = uniform;

    out << "time_s";
    for (int vi = 0; vi < g.vertex_count(); ++vi)
        out << ",rho_kg_per_m3@" << rg.label(g.vertex_at(vi));
    if (cs2)
        for (VertexId v : rg.parent().vertices()) out << ",p_Pa@n" << v;
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& ed = g.edge(e);
        out << ",flow_kg_per_s@" << rg.label(ed.tail) << ">" << rg.label(ed.head);
    }
    out << "\n";

    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        out << fmt(traj.times[k]);
        for (int vi = 0; vi < g.vertex_count(); ++vi)
            out << "," << fmt(traj.density(vi, static_cast<int>(k)));
        if (cs2)
            for (VertexId v : rg.parent().vertices())
                out << ","
                    << fmt(cs2_value * traj.density(g.index_of(rg.refined_of_parent(v)), static_cast<int>(k)));
        for (int e = 0; e < g.edge_count(); ++e)
            out << "," << fmt(traj.edge_flow(e, static_cast<int>(k)));
        out << "\n";
    }
}

void write_run_summary(const std::string& path, const Trajectory& traj) {
    json j;
    j["epsilon_m"] = traj.epsilon;
    j["horizon_s"] = traj.times.back();
    j["output_points"] = traj.times.size();
    j["mass_audit"] = json{{"per_node_rel", traj.audit.per_node_rel},
                           {"global_rel", traj.audit.global_rel},
                           {"throughput_kg", traj.audit.throughput}};
    j["integrator"] = json{{"steps", traj.stats.steps},
                           {"rejected", traj.stats.rejected},
                           {"newton_iterations", traj.stats.newton_iterations},
                           {"rhs_evaluations", traj.stats.rhs_evaluations},
                           {"jacobian_evaluations", traj.stats.jacobian_evaluations}};
    write_json(path, j);
}

void write_steady_result(const std::string& path, const MetricGraph& g, const SteadyState& st) {
    json j;
    json dens = json::object();
    for (const auto& [v, rho] : st.density) dens[std::to_string(v)] = rho;
    j["density_kg_per_m3"] = dens;
    json flows = json::array();
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& ed = g.edge(e);
        flows.push_back(json{{"from", ed.tail}, {"to", ed.head},
                             {"flow_kg_per_s", st.edge_flow[static_cast<std::size_t>(e)]}});
    }
    j["edge_flow"] = flows;
    json realized = json::object();
    for (const auto& [v, q] : st.realized_injection) realized[std::to_string(v)] = q;
    j["realized_slack_injection_kg_per_s"] = realized;
    j["balance_residual_kg_per_s"] = st.balance_residual;
    j["edge_residual_rel"] = st.edge_residual;
    j["newton_iterations"] = st.newton_iterations;
    write_json(path, j);
}

void write_order_report(const std::string& path, const OrderReport& rep, const RefinedGraph& rg) {
    json j;
    j["ordered"] = rep.ordered;
    j["tol_kg_per_m3"] = rep.tol;
    j["worst_margin_kg_per_m3"] = rep.worst_margin;
    if (rep.first_crossing) {
        const auto& c = *rep.first_crossing;
        json jc{{"t_s", c.t},
                {"refined_vertex", rg.label(c.refined_vertex)},
                {"at_parent_node", c.at_parent_node}};
        if (c.at_parent_node)
            jc["parent_vertex"] = c.parent_vertex;
        else {
            const auto& ed = rg.parent().edge(c.parent_edge);
            jc["parent_edge"] = json{{"from", ed.tail}, {"to", ed.head}};
            jc["arclength_m"] = c.arclength;
        }
        j["first_crossing"] = jc;
    }
    write_json(path, j);
}

void write_margins_csv(const std::string& path, const OrderReport& rep, const RefinedGraph& rg) {
    std::ofstream out(path);
    require(out.good(), Errc::io_error, "cannot write " + path);
    const MetricGraph& g = rg.graph();
    out << "time_s";
    for (int vi = 0; vi < g.vertex_count(); ++vi)
        out << ",margin_kg_per_m3@" << rg.label(g.vertex_at(vi));
    out << "\n";
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
        out << fmt(rep.times[k]);
        for (int vi = 0; vi < g.vertex_count(); ++vi)
            out << "," << fmt(rep.margins(vi, static_cast<int>(k)));
        out << "\n";
    }
}

void write_certificate(const std::string& path, const EnvelopeCertificate& cert, const RefinedGraph& rg) {
    json j;
    j["feasible"] = cert.feasible;
    json arr = json::array();
    for (const auto& v : cert.violations)
        arr.push_back(json{{"t_s", v.t},
                           {"refined_vertex", rg.label(v.refined_vertex)},
                           {"density_kg_per_m3", v.density},
                           {"side", v.below ? "below_rho_min" : "above_rho_max"}});
    j["violations"] = arr;
    write_json(path, j);
}

void write_policy_trace(const std::string& path, const PolicyTrace& trace) {
    json j;
    json actions = json::array();
    for (const auto& a : trace.actions)
        actions.push_back(json{{"t_s", a.t},
                               {"vertex", a.parent_vertex},
                               {"pin_to", a.pin_to_upper ? "upper" : "lower"},
                               {"trigger_margin_kg_per_m3", a.trigger_margin}});
    j["actions"] = actions;
    j["effective_injections_kg_per_s"] = vertex_map_to_json(trace.effective_injections);
    write_json(path, j);
}

void write_policy_trace_csv(const std::string& path, const PolicyTrace& trace) {
    std::ofstream out(path);
    require(out.good(), Errc::io_error, "cannot write " + path);
    const Trajectory& cl = trace.closed_loop;
    const RefinedGraph& rg = cl.refined();
    const MetricGraph& g = rg.graph();
    out << "time_s";
    for (int vi = 0; vi < g.vertex_count(); ++vi) {
        std::string l = rg.label(g.vertex_at(vi));
        out << ",rho@" << l << ",rho_upper@" << l << ",rho_lower@" << l;
    }
    for (const auto& [v, fn] : trace.effective_injections) out << ",q_eff@n" << v;
    out << "\n";
    for (std::size_t k = 0; k < cl.times.size(); ++k) {
        out << fmt(cl.times[k]);
        for (int vi = 0; vi < g.vertex_count(); ++vi)
            out << "," << fmt(cl.density(vi, static_cast<int>(k))) << ","
                << fmt(trace.upper.density(vi, static_cast<int>(k))) << ","
                << fmt(trace.lower.density(vi, static_cast<int>(k)));
        for (const auto& [v, fn] : trace.effective_injections) out << "," << fmt(fn.value(cl.times[k]));
        out << "\n";
    }
}

} // namespace pipeflow
