#pragma once

#include "mnemos/types.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

namespace mnemos {

enum class NodeKind { Entity, Topic, Preference, Turn };
enum class EdgeKind { RELATES_TO, PREFERS, MENTIONS, FOLLOWS_UP, ABOUT };

std::string to_string(NodeKind kind);
std::string to_string(EdgeKind kind);
// Case-insensitive. Return nullopt for unknown names.
std::optional<NodeKind> node_kind_from_string(std::string_view s);
std::optional<EdgeKind> edge_kind_from_string(std::string_view s);

struct ConceptNode {
    NodeId id = 0;
    std::string label;
    std::string canonical_key;
    NodeKind kind = NodeKind::Entity;
    EmbeddingVector embedding;
    Timestamp created_at = 0;
    Timestamp last_seen = 0;
    std::uint32_t mention_count = 1;
    std::set<std::string> session_ids;
};

struct RelationEdge {
    EdgeId id = 0;
    NodeId src = 0;
    NodeId dst = 0;
    EdgeKind kind = EdgeKind::RELATES_TO;
    Timestamp created_at = 0;
    Timestamp last_seen = 0;
    double confidence = 0.0;
};

struct ScoredNode {
    NodeId id = 0;
    double score = 0.0;
    double semantic = 0.0;
    double recency = 0.0;
    double proximity = 0.0;
};

struct Subgraph {
    std::vector<ConceptNode> nodes;  // ascending id
    std::vector<RelationEdge> edges; // ascending (src, dst, kind)
};

struct TimeWindow {
    Timestamp from = 0;
    Timestamp to = 0;
};

struct GraphConfig {
    double semantic_weight = 0.6;
    double recency_weight = 0.25;
    double proximity_weight = 0.15;
    double recency_tau_ms = 30.0 * kMillisPerDay;
    double merge_threshold = 0.92;
    int max_proximity_hops = 3;
};

struct NodeQuery {
    EmbeddingVector embedding;
    Timestamp now = 0;
    std::size_t k = 10;
    std::optional<TimeWindow> window;
    std::vector<NodeId> seeds;
};

/// Temporal concept graph.
///
/// Nodes are deduplicated on (canonical_key, kind) and on embedding
/// similarity within a kind; edges on (src, dst, kind). Time never comes
/// from a wall clock here, every timestamp is supplied by the caller.
///
/// Thread-safe: readers share, writers are serialized. Accessors return
/// copies.
class MemoryGraph {
public:
    explicit MemoryGraph(GraphConfig config = {});

    MemoryGraph(const MemoryGraph&) = delete;
    MemoryGraph& operator=(const MemoryGraph&) = delete;

    NodeId upsert_node(std::string_view label, NodeKind kind, const EmbeddingVector& embedding,
                       Timestamp ts, std::string_view session_id);

    EdgeId add_edge(NodeId src, NodeId dst, EdgeKind kind, Timestamp ts, double confidence);

    // Descending score, ties by ascending id.
    std::vector<ScoredNode> query_nodes(const NodeQuery& query) const;

    // Nodes within `hops` undirected steps of any input id, plus every edge
    // with both endpoints inside.
    Subgraph neighborhood(const std::vector<NodeId>& ids, int hops) const;

    // Drops the lowest (recency * mention_count) nodes until at most
    // `max_nodes` remain. `now` defaults to the newest last_seen in the store.
    // Returns the removed ids in removal order.
    std::vector<NodeId> prune(std::size_t max_nodes, std::optional<Timestamp> now = {});

    std::optional<ConceptNode> node(NodeId id) const;
    std::optional<NodeId> find(std::string_view label, NodeKind kind) const;
    // Any kind; prefers the lowest id when several kinds share the key.
    std::optional<NodeId> find_by_key(std::string_view canonical_key) const;

    std::vector<ConceptNode> nodes() const;
    std::vector<RelationEdge> edges() const;
    std::size_t node_count() const;
    std::size_t edge_count() const;

    double recency(Timestamp last_seen, Timestamp now) const;
    const GraphConfig& config() const { return config_; }

    // Canonical form: nodes by id, edges by (src, dst, kind). Edge ids are
    // internal handles and are left out so the snapshot depends only on the
    // logical content.
    nlohmann::json snapshot() const;

private:
    using EdgeKey = std::tuple<NodeId, NodeId, EdgeKind>;

    std::map<NodeId, int> hop_distances(const std::vector<NodeId>& seeds, int max_hops) const;
    std::vector<NodeId> neighbors(NodeId id) const;

    GraphConfig config_;
    mutable std::shared_mutex mutex_;
    NodeId next_node_id_ = 1;
    EdgeId next_edge_id_ = 1;
    std::map<NodeId, ConceptNode> nodes_;
    std::map<EdgeId, RelationEdge> edges_;
    std::map<std::pair<std::string, NodeKind>, NodeId> by_key_;
    std::map<EdgeKey, EdgeId> by_edge_key_;
    std::map<NodeId, std::set<EdgeId>> incident_;
};

} // namespace mnemos
