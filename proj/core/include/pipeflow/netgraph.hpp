#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pipeflow {

using VertexId = int;

/// Pipe geometry attached to a directed edge. `area` defaults to the circular
/// cross-section pi*D^2/4 when not given explicitly.
struct PipeGeometry {
    double length = 0.0;   // m
    double diameter = 0.0; // m
    double friction = 0.0; // dimensionless Darcy-Weisbach factor
    double area = 0.0;     // m^2

    static double circular_area(double diameter);
};

struct EdgeSpec {
    VertexId tail = 0;
    VertexId head = 0;
    PipeGeometry pipe;
};

/// Directed metric graph with a slack/flow vertex partition.
///
/// Slack vertices carry a prescribed density, flow vertices a prescribed
/// injection (positive = mass entering the network; withdrawals are negative
/// injections). Parallel edges are not supported; model a parallel pipe by
/// inserting a degree-2 auxiliary vertex.
class MetricGraph {
public:
    /// Validates and builds. Throws Error with code DisconnectedGraph,
    /// EmptySlackSet, DuplicateEdge or NonPositiveParameter.
    static MetricGraph build(std::vector<VertexId> vertices, std::vector<EdgeSpec> edges,
                             std::vector<VertexId> slack);

    int vertex_count() const { return static_cast<int>(vertices_.size()); }
    int edge_count() const { return static_cast<int>(edges_.size()); }

    const std::vector<VertexId>& vertices() const { return vertices_; }
    const std::vector<EdgeSpec>& edges() const { return edges_; }
    const EdgeSpec& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }

    bool has_vertex(VertexId v) const { return index_.count(v) != 0; }
    int index_of(VertexId v) const; // dense index in [0, vertex_count)
    VertexId vertex_at(int idx) const { return vertices_[static_cast<std::size_t>(idx)]; }

    bool is_slack(VertexId v) const;
    const std::vector<VertexId>& slack_set() const { return slack_; }
    const std::vector<VertexId>& flow_set() const { return flow_; }

    /// Edge indices with head == v (incoming) / tail == v (outgoing).
    const std::vector<int>& in_edges(VertexId v) const;
    const std::vector<int>& out_edges(VertexId v) const;

    std::optional<int> find_edge(VertexId tail, VertexId head) const;

private:
    std::vector<VertexId> vertices_; // sorted
    std::vector<EdgeSpec> edges_;
    std::vector<VertexId> slack_, flow_;
    std::map<VertexId, int> index_;
    std::vector<std::vector<int>> in_, out_;
    std::vector<bool> slack_mask_;
};

/// Position of a refined vertex on its parent graph: either a parent vertex,
/// or an interior point (parent edge index, arclength from the edge tail).
struct RefinedVertexCoord {
    std::optional<VertexId> parent_vertex;
    int parent_edge = -1;
    double arclength = 0.0;

    bool at_parent_node() const { return parent_vertex.has_value(); }
};

/// epsilon-refinement of a MetricGraph (equal subdivision, n = ceil(L/eps)).
/// Refined vertex ids are dense 0..n-1; parent vertices keep stable labels.
class RefinedGraph {
public:
    const MetricGraph& graph() const { return graph_; }
    const MetricGraph& parent() const { return *parent_; }
    std::shared_ptr<const MetricGraph> parent_ptr() const { return parent_; }
    double epsilon() const { return epsilon_; }

    int parent_edge_of(int refined_edge) const { return edge_parent_[static_cast<std::size_t>(refined_edge)]; }
    const RefinedVertexCoord& coord(VertexId refined_vertex) const {
        return coords_[static_cast<std::size_t>(refined_vertex)];
    }
    /// Ordered segment (refined edge) indices of one parent edge, tail to head.
    const std::vector<int>& segments(int parent_edge) const {
        return segments_[static_cast<std::size_t>(parent_edge)];
    }
    VertexId refined_of_parent(VertexId parent_vertex) const;
    const std::string& label(VertexId refined_vertex) const {
        return labels_[static_cast<std::size_t>(refined_vertex)];
    }

    friend RefinedGraph refine(const MetricGraph& g, double epsilon);

private:
    MetricGraph graph_;
    std::shared_ptr<const MetricGraph> parent_;
    double epsilon_ = 0.0;
    std::vector<int> edge_parent_;
    std::vector<RefinedVertexCoord> coords_;
    std::vector<std::vector<int>> segments_;
    std::map<VertexId, VertexId> parent_to_refined_;
    std::vector<std::string> labels_;
};

/// Splits every edge of length L into n = ceil(L/eps) equal segments, so each
/// refined length satisfies eps*L/(eps+L) < L/n <= eps. (The upper bound is
/// intentionally non-strict so that L exactly divisible by eps is legal.)
RefinedGraph refine(const MetricGraph& g, double epsilon);

} // namespace pipeflow
