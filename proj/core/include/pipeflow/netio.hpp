#pragma once

#include "pipeflow/monotone.hpp"
#include "pipeflow/robust.hpp"
#include "pipeflow/steady.hpp"
#include "pipeflow/transient.hpp"

#include <string>

namespace pipeflow {

/// A network file bundles the graph with one dissipation closure per edge.
struct Network {
    std::string title;
    MetricGraph graph;
    std::vector<ModelPtr> models;
};

// Structured-text (JSON) file formats. Loaders throw ParseError / IoError;
// save followed by load reproduces the in-memory object exactly.
Network load_network(const std::string& path);
void save_network(const std::string& path, const Network& net);

Scenario load_scenario(const std::string& path, const MetricGraph& g);
void save_scenario(const std::string& path, const MetricGraph& g, const Scenario& s);

Envelope load_envelope(const std::string& path);
void save_envelope(const std::string& path, const Envelope& env);

// Result writers. CSV values are printed with "%.12g", so identical runs
// produce byte-identical files.
void write_trajectory_csv(const std::string& path, const Trajectory& traj, const Network& net);
void write_run_summary(const std::string& path, const Trajectory& traj);
void write_steady_result(const std::string& path, const MetricGraph& g, const SteadyState& st);
void write_order_report(const std::string& path, const OrderReport& rep, const RefinedGraph& rg);
void write_margins_csv(const std::string& path, const OrderReport& rep, const RefinedGraph& rg);
void write_certificate(const std::string& path, const EnvelopeCertificate& cert, const RefinedGraph& rg);
void write_policy_trace(const std::string& path, const PolicyTrace& trace);
void write_policy_trace_csv(const std::string& path, const PolicyTrace& trace);

} // namespace pipeflow
