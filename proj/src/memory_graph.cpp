#include "mnemos/memory_graph.hpp"

#include "mnemos/text.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <mutex>

namespace mnemos {

namespace {

constexpr double kUnitNormTolerance = 1e-6;

const char* const kNodeKindNames[] = {"Entity", "Topic", "Preference", "Turn"};
const char* const kEdgeKindNames[] = {"RELATES_TO", "PREFERS", "MENTIONS", "FOLLOWS_UP", "ABOUT"};

void check_embedding(const EmbeddingVector& e) {
    if (e.is_zero()) return;
    if (std::abs(e.norm() - 1.0) > kUnitNormTolerance) {
        throw InvalidArgument("node embedding must be unit-norm or zero");
    }
}

} // namespace

std::string to_string(NodeKind kind) { return kNodeKindNames[static_cast<int>(kind)]; }
std::string to_string(EdgeKind kind) { return kEdgeKindNames[static_cast<int>(kind)]; }

std::optional<NodeKind> node_kind_from_string(std::string_view s) {
    auto lower = text::to_lower(s);
    for (int i = 0; i < 4; ++i) {
        if (lower == text::to_lower(kNodeKindNames[i])) return static_cast<NodeKind>(i);
    }
    return std::nullopt;
}

std::optional<EdgeKind> edge_kind_from_string(std::string_view s) {
    auto lower = text::to_lower(s);
    for (int i = 0; i < 5; ++i) {
        if (lower == text::to_lower(kEdgeKindNames[i])) return static_cast<EdgeKind>(i);
    }
    return std::nullopt;
}

MemoryGraph::MemoryGraph(GraphConfig config) : config_(config) {
    if (config_.recency_tau_ms <= 0) throw InvalidArgument("recency tau must be positive");
    if (config_.max_proximity_hops < 0) throw InvalidArgument("proximity hops must be >= 0");
}

NodeId MemoryGraph::upsert_node(std::string_view label, NodeKind kind,
                                const EmbeddingVector& embedding, Timestamp ts,
                                std::string_view session_id) {
    if (ts <= 0) throw InvalidArgument("timestamp must be positive");
    auto key = text::canonical_key(label);
    if (key.empty()) throw InvalidArgument("node label must not be empty");
    check_embedding(embedding);

    std::unique_lock lock(mutex_);

    if (!nodes_.empty()) {
        const auto& any = nodes_.begin()->second.embedding;
        if (any.dimension() != embedding.dimension()) {
            throw DimensionMismatch(any.dimension(), embedding.dimension());
        }
    }

    // Candidates: exact key match plus any same-kind node above the merge
    // threshold. The earliest-created one survives.
    const ConceptNode* target = nullptr;
    auto consider = [&](const ConceptNode& n) {
        if (!target || std::tie(n.created_at, n.id) < std::tie(target->created_at, target->id)) {
            target = &n;
        }
    };
    if (auto it = by_key_.find({key, kind}); it != by_key_.end()) consider(nodes_.at(it->second));
    if (!embedding.is_zero()) {
        for (const auto& [id, n] : nodes_) {
            if (n.kind != kind) continue;
            if (cosine(n.embedding, embedding) >= config_.merge_threshold) consider(n);
        }
    }

    if (target) {
        auto& n = nodes_.at(target->id);
        n.mention_count += 1;
        n.last_seen = std::max(n.last_seen, ts);
        n.session_ids.emplace(session_id);
        return n.id;
    }

    ConceptNode n;
    n.id = next_node_id_++;
    n.label = std::string(label);
    n.canonical_key = key;
    n.kind = kind;
    n.embedding = embedding;
    n.created_at = ts;
    n.last_seen = ts;
    n.mention_count = 1;
    n.session_ids.emplace(session_id);
    by_key_[{key, kind}] = n.id;
    incident_[n.id];
    auto id = n.id;
    nodes_.emplace(id, std::move(n));
    return id;
}

EdgeId MemoryGraph::add_edge(NodeId src, NodeId dst, EdgeKind kind, Timestamp ts,
                             double confidence) {
    if (src == dst) throw InvalidArgument("self-loop edges are not allowed");
    if (ts <= 0) throw InvalidArgument("timestamp must be positive");
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
        throw InvalidArgument("edge confidence must lie in [0, 1]");
    }

    std::unique_lock lock(mutex_);
    if (!nodes_.contains(src)) throw NotFound("unknown node id " + std::to_string(src));
    if (!nodes_.contains(dst)) throw NotFound("unknown node id " + std::to_string(dst));

    EdgeKey key{src, dst, kind};
    if (auto it = by_edge_key_.find(key); it != by_edge_key_.end()) {
        auto& e = edges_.at(it->second);
        e.last_seen = std::max(e.last_seen, ts);
        e.confidence = std::max(e.confidence, confidence);
        return e.id;
    }

    RelationEdge e{next_edge_id_++, src, dst, kind, ts, ts, confidence};
    by_edge_key_[key] = e.id;
    incident_[src].insert(e.id);
    incident_[dst].insert(e.id);
    edges_.emplace(e.id, e);
    return e.id;
}

double MemoryGraph::recency(Timestamp last_seen, Timestamp now) const {
    // clock skew (last_seen in the future) counts as age 0
    double age = std::max<double>(0.0, static_cast<double>(now - last_seen));
    return std::exp(-age / config_.recency_tau_ms);
}

std::vector<NodeId> MemoryGraph::neighbors(NodeId id) const {
    std::vector<NodeId> out;
    auto it = incident_.find(id);
    if (it == incident_.end()) return out;
    for (EdgeId eid : it->second) {
        const auto& e = edges_.at(eid);
        out.push_back(e.src == id ? e.dst : e.src);
    }
    return out;
}

std::map<NodeId, int> MemoryGraph::hop_distances(const std::vector<NodeId>& seeds,
                                                 int max_hops) const {
    std::map<NodeId, int> dist;
    std::deque<NodeId> frontier;
    for (NodeId s : seeds) {
        if (nodes_.contains(s) && dist.emplace(s, 0).second) frontier.push_back(s);
    }
    while (!frontier.empty()) {
        NodeId cur = frontier.front();
        frontier.pop_front();
        int d = dist.at(cur);
        if (d == max_hops) continue;
        for (NodeId nb : neighbors(cur)) {
            if (dist.emplace(nb, d + 1).second) frontier.push_back(nb);
        }
    }
    return dist;
}

std::vector<ScoredNode> MemoryGraph::query_nodes(const NodeQuery& q) const {
    if (q.k == 0) throw InvalidArgument("k must be at least 1");

    std::shared_lock lock(mutex_);
    auto dist = hop_distances(q.seeds, config_.max_proximity_hops);

    std::vector<ScoredNode> scored;
    scored.reserve(nodes_.size());
    for (const auto& [id, n] : nodes_) {
        if (q.window && (n.last_seen < q.window->from || n.last_seen > q.window->to)) continue;
        ScoredNode s;
        s.id = id;
        s.semantic = (cosine(q.embedding, n.embedding) + 1.0) / 2.0;
        s.recency = recency(n.last_seen, q.now);
        auto d = dist.find(id);
        s.proximity = d == dist.end() ? 0.0 : 1.0 / (1.0 + d->second);
        s.score = config_.semantic_weight * s.semantic + config_.recency_weight * s.recency +
                  config_.proximity_weight * s.proximity;
        scored.push_back(s);
    }

    auto by_rank = [](const ScoredNode& a, const ScoredNode& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    };
    auto keep = std::min(q.k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                      scored.end(), by_rank);
    scored.resize(keep);
    return scored;
}

Subgraph MemoryGraph::neighborhood(const std::vector<NodeId>& ids, int hops) const {
    if (hops < 0) throw InvalidArgument("hops must be >= 0");
    std::shared_lock lock(mutex_);
    for (NodeId id : ids) {
        if (!nodes_.contains(id)) throw NotFound("unknown node id " + std::to_string(id));
    }
    auto dist = hop_distances(ids, hops);

    Subgraph out;
    for (const auto& [id, d] : dist) out.nodes.push_back(nodes_.at(id));
    for (const auto& [key, eid] : by_edge_key_) {
        const auto& e = edges_.at(eid);
        if (dist.contains(e.src) && dist.contains(e.dst)) out.edges.push_back(e);
    }
    return out;
}

std::vector<NodeId> MemoryGraph::prune(std::size_t max_nodes, std::optional<Timestamp> now) {
    if (max_nodes == 0) throw InvalidArgument("max_nodes must be at least 1");
    std::unique_lock lock(mutex_);
    if (nodes_.size() <= max_nodes) return {};

    Timestamp ref = 0;
    if (now) {
        ref = *now;
    } else {
        for (const auto& [id, n] : nodes_) ref = std::max(ref, n.last_seen);
    }

    std::vector<std::pair<double, NodeId>> ranked;
    for (const auto& [id, n] : nodes_) {
        ranked.emplace_back(recency(n.last_seen, ref) * n.mention_count, id);
    }
    std::sort(ranked.begin(), ranked.end());

    std::vector<NodeId> removed;
    std::size_t excess = nodes_.size() - max_nodes;
    for (std::size_t i = 0; i < excess; ++i) {
        NodeId id = ranked[i].second;
        for (EdgeId eid : std::set<EdgeId>(incident_.at(id))) {
            const auto& e = edges_.at(eid);
            NodeId other = e.src == id ? e.dst : e.src;
            incident_[other].erase(eid);
            by_edge_key_.erase({e.src, e.dst, e.kind});
            edges_.erase(eid);
        }
        incident_.erase(id);
        const auto& n = nodes_.at(id);
        by_key_.erase({n.canonical_key, n.kind});
        nodes_.erase(id);
        removed.push_back(id);
    }
    return removed;
}

std::optional<ConceptNode> MemoryGraph::node(NodeId id) const {
    std::shared_lock lock(mutex_);
    auto it = nodes_.find(id);
    if (it == nodes_.end()) return std::nullopt;
    return it->second;
}

std::optional<NodeId> MemoryGraph::find(std::string_view label, NodeKind kind) const {
    std::shared_lock lock(mutex_);
    auto it = by_key_.find({text::canonical_key(label), kind});
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
}

std::optional<NodeId> MemoryGraph::find_by_key(std::string_view canonical_key) const {
    std::shared_lock lock(mutex_);
    std::optional<NodeId> best;
    for (int k = 0; k < 4; ++k) {
        auto it = by_key_.find({std::string(canonical_key), static_cast<NodeKind>(k)});
        if (it != by_key_.end() && (!best || it->second < *best)) best = it->second;
    }
    return best;
}

std::vector<ConceptNode> MemoryGraph::nodes() const {
    std::shared_lock lock(mutex_);
    std::vector<ConceptNode> out;
    out.reserve(nodes_.size());
    for (const auto& [id, n] : nodes_) out.push_back(n);
    return out;
}

std::vector<RelationEdge> MemoryGraph::edges() const {
    std::shared_lock lock(mutex_);
    std::vector<RelationEdge> out;
    out.reserve(edges_.size());
    for (const auto& [key, eid] : by_edge_key_) out.push_back(edges_.at(eid));
    return out;
}

std::size_t MemoryGraph::node_count() const {
    std::shared_lock lock(mutex_);
    return nodes_.size();
}

std::size_t MemoryGraph::edge_count() const {
    std::shared_lock lock(mutex_);
    return edges_.size();
}

nlohmann::json MemoryGraph::snapshot() const {
    std::shared_lock lock(mutex_);
    auto nodes = nlohmann::json::array();
    for (const auto& [id, n] : nodes_) {
        nodes.push_back({
            {"id", n.id},
            {"label", n.label},
            {"canonical_key", n.canonical_key},
            {"kind", to_string(n.kind)},
            {"embedding", n.embedding.values},
            {"created_at", n.created_at},
            {"last_seen", n.last_seen},
            {"mention_count", n.mention_count},
            {"session_ids", n.session_ids},
        });
    }

    std::vector<const RelationEdge*> sorted;
    for (const auto& [id, e] : edges_) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](const RelationEdge* a, const RelationEdge* b) {
        return std::make_tuple(a->src, a->dst, to_string(a->kind)) <
               std::make_tuple(b->src, b->dst, to_string(b->kind));
    });
    auto edges = nlohmann::json::array();
    for (const auto* e : sorted) {
        edges.push_back({
            {"src", e->src},
            {"dst", e->dst},
            {"kind", to_string(e->kind)},
            {"created_at", e->created_at},
            {"last_seen", e->last_seen},
            {"confidence", e->confidence},
        });
    }
    return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

} // namespace mnemos
