#include "pipeflow/netgraph.hpp"

#include "pipeflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pipeflow {

double PipeGeometry::circular_area(double diameter) {
    return 0.25 * M_PI * diameter * diameter;
}

MetricGraph MetricGraph::build(std::vector<VertexId> vertices, std::vector<EdgeSpec> edges,
                               std::vector<VertexId> slack) {
    MetricGraph g;
    std::sort(vertices.begin(), vertices.end());
    vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
    g.vertices_ = std::move(vertices);
    for (int i = 0; i < g.vertex_count(); ++i) g.index_[g.vertices_[static_cast<std::size_t>(i)]] = i;

    require(!slack.empty(), Errc::empty_slack_set, "at least one slack (density) vertex is required");
    std::set<VertexId> slack_set(slack.begin(), slack.end());
    for (VertexId v : slack_set)
        require(g.has_vertex(v), Errc::vertex_mismatch, "slack vertex " + std::to_string(v) + " not in vertex set");

    std::set<std::pair<VertexId, VertexId>> seen;
    for (auto& e : edges) {
        require(g.has_vertex(e.tail) && g.has_vertex(e.head), Errc::vertex_mismatch,
                "edge endpoint not in vertex set");
        require(e.tail != e.head, Errc::duplicate_edge, "self-loop edges are not allowed");
        require(e.pipe.length > 0.0, Errc::non_positive_parameter, "edge length must be positive");
        require(e.pipe.diameter > 0.0, Errc::non_positive_parameter, "edge diameter must be positive");
        require(e.pipe.friction > 0.0, Errc::non_positive_parameter, "edge friction factor must be positive");
        if (e.pipe.area <= 0.0) e.pipe.area = PipeGeometry::circular_area(e.pipe.diameter);
        auto key = std::minmax(e.tail, e.head);
        require(seen.insert({key.first, key.second}).second, Errc::duplicate_edge,
                "parallel edge between " + std::to_string(e.tail) + " and " + std::to_string(e.head));
    }
    g.edges_ = std::move(edges);

    g.in_.assign(static_cast<std::size_t>(g.vertex_count()), {});
    g.out_.assign(static_cast<std::size_t>(g.vertex_count()), {});
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& ed = g.edge(e);
        g.out_[static_cast<std::size_t>(g.index_of(ed.tail))].push_back(e);
        g.in_[static_cast<std::size_t>(g.index_of(ed.head))].push_back(e);
    }

    g.slack_mask_.assign(static_cast<std::size_t>(g.vertex_count()), false);
    for (VertexId v : slack_set) {
        g.slack_.push_back(v);
        g.slack_mask_[static_cast<std::size_t>(g.index_of(v))] = true;
    }
    for (VertexId v : g.vertices_)
        if (!slack_set.count(v)) g.flow_.push_back(v);

    // Connectivity, ignoring orientation, from the slack set.
    std::vector<bool> reached(static_cast<std::size_t>(g.vertex_count()), false);
    std::vector<int> stack;
    for (VertexId v : g.slack_) {
        int i = g.index_of(v);
        if (!reached[static_cast<std::size_t>(i)]) {
            reached[static_cast<std::size_t>(i)] = true;
            stack.push_back(i);
        }
    }
    while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        VertexId v = g.vertex_at(i);
        auto visit = [&](VertexId w) {
            int j = g.index_of(w);
            if (!reached[static_cast<std::size_t>(j)]) {
                reached[static_cast<std::size_t>(j)] = true;
                stack.push_back(j);
            }
        };
        for (int e : g.in_edges(v)) visit(g.edge(e).tail);
        for (int e : g.out_edges(v)) visit(g.edge(e).head);
    }
    for (int i = 0; i < g.vertex_count(); ++i)
        require(reached[static_cast<std::size_t>(i)], Errc::disconnected_graph,
                "vertex " + std::to_string(g.vertex_at(i)) + " unreachable from the slack set");
    return g;
}

int MetricGraph::index_of(VertexId v) const {
    auto it = index_.find(v);
    require(it != index_.end(), Errc::vertex_mismatch, "unknown vertex " + std::to_string(v));
    return it->second;
}

bool MetricGraph::is_slack(VertexId v) const {
    return slack_mask_[static_cast<std::size_t>(index_of(v))];
}

const std::vector<int>& MetricGraph::in_edges(VertexId v) const {
    return in_[static_cast<std::size_t>(index_of(v))];
}

const std::vector<int>& MetricGraph::out_edges(VertexId v) const {
    return out_[static_cast<std::size_t>(index_of(v))];
}

std::optional<int> MetricGraph::find_edge(VertexId tail, VertexId head) const {
    for (int e : out_edges(tail))
        if (edge(e).head == head) return e;
    return std::nullopt;
}

VertexId RefinedGraph::refined_of_parent(VertexId parent_vertex) const {
    auto it = parent_to_refined_.find(parent_vertex);
    require(it != parent_to_refined_.end(), Errc::vertex_mismatch,
            "vertex " + std::to_string(parent_vertex) + " is not a parent vertex");
    return it->second;
}

RefinedGraph refine(const MetricGraph& g, double epsilon) {
    require(epsilon > 0.0, Errc::non_positive_epsilon, "refinement epsilon must be positive");

    RefinedGraph rg;
    rg.parent_ = std::make_shared<const MetricGraph>(g);
    rg.epsilon_ = epsilon;

    std::vector<VertexId> vertices;
    std::vector<EdgeSpec> edges;
    std::vector<VertexId> slack;

    VertexId next = 0;
    for (VertexId v : g.vertices()) {
        VertexId rv = next++;
        rg.parent_to_refined_[v] = rv;
        vertices.push_back(rv);
        rg.coords_.push_back(RefinedVertexCoord{v, -1, 0.0});
        rg.labels_.push_back("n" + std::to_string(v));
        if (g.is_slack(v)) slack.push_back(rv);
    }

    rg.segments_.resize(static_cast<std::size_t>(g.edge_count()));
    for (int pe = 0; pe < g.edge_count(); ++pe) {
        const auto& ed = g.edge(pe);
        double L = ed.pipe.length;
        int n = static_cast<int>(std::ceil(L / epsilon));
        if (n < 1) n = 1;
        double seg = L / n;
        std::string base = "e" + std::to_string(ed.tail) + "-" + std::to_string(ed.head);

        VertexId prev = rg.parent_to_refined_.at(ed.tail);
        for (int k = 1; k <= n; ++k) {
            VertexId cur;
            if (k == n) {
                cur = rg.parent_to_refined_.at(ed.head);
            } else {
                cur = next++;
                vertices.push_back(cur);
                rg.coords_.push_back(RefinedVertexCoord{std::nullopt, pe, seg * k});
                rg.labels_.push_back(base + "." + std::to_string(k));
            }
            EdgeSpec re;
            re.tail = prev;
            re.head = cur;
            re.pipe = ed.pipe;
            // Keep the parent sum exact: last segment absorbs rounding.
            re.pipe.length = (k == n) ? (L - seg * (n - 1)) : seg;
            rg.segments_[static_cast<std::size_t>(pe)].push_back(static_cast<int>(edges.size()));
            rg.edge_parent_.push_back(pe);
            edges.push_back(re);
            prev = cur;
        }
    }

    rg.graph_ = MetricGraph::build(std::move(vertices), std::move(edges), std::move(slack));
    return rg;
}

} // namespace pipeflow
