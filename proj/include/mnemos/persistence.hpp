#pragma once

#include "mnemos/memory_graph.hpp"
#include "mnemos/vector_index.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace mnemos {

enum class EventKind {
    turn_recorded,
    node_upserted,
    edge_added,
    chunk_added,
    doc_removed,
    answer_generated,
    reflection_step,
    fallback_extract,
    llm_error,
    nodes_pruned,
    session_created,
};

std::string to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view s);

struct Event {
    std::uint64_t seq = 0;
    Timestamp ts = 0;
    EventKind kind = EventKind::turn_recorded;
    nlohmann::json payload = nlohmann::json::object();
};

nlohmann::json to_json(const Event& e);

// Last line of a sealed log file. `log_sha256` covers every byte before it.
struct LogFooter {
    std::uint64_t last_seq = 0;
    std::string log_sha256;
    std::string state_hash;
};

std::string sha256_hex(std::string_view bytes);

/// Append-only event log, in memory and optionally mirrored to a JSONL file.
///
/// File appends are flushed and fdatasync'ed before append() returns. A
/// footer line can be written with seal(); reopening a sealed log drops the
/// footer so appends can continue.
class EventLog {
public:
    EventLog();
    explicit EventLog(std::filesystem::path path);
    ~EventLog();

    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    std::uint64_t append(EventKind kind, Timestamp ts, nlohmann::json payload);

    // Events with seq > `seq`, ascending.
    std::vector<Event> since(std::uint64_t seq) const;
    std::vector<Event> events() const { return since(0); }
    std::uint64_t last_seq() const;

    void seal(const std::string& state_hash);

    const std::optional<std::filesystem::path>& path() const { return path_; }

private:
    void write_line(const std::string& line);
    void drop_footer();

    mutable std::shared_mutex mutex_;
    std::vector<Event> events_;
    std::optional<std::filesystem::path> path_;
    int fd_ = -1;
    bool sealed_ = false;
    std::uint64_t body_bytes_ = 0;
};

struct LogContents {
    std::vector<Event> events;
    std::optional<LogFooter> footer;
    std::string body_sha256;
    std::size_t body_bytes = 0; // bytes before the footer
};

// Parses JSONL log text. Throws CorruptLog on unreadable lines, seq gaps or
// unknown kinds, naming the offending seq.
LogContents parse_log(std::string_view text);
LogContents read_log_file(const std::filesystem::path& path);

struct TurnRecord {
    std::string speaker; // "user" or "assistant"
    std::string text;
    Timestamp ts = 0;
    NodeId node_id = 0;
};

/// Applies store mutations and appends the matching events under one lock,
/// so the log order is exactly the mutation order.
class Recorder {
public:
    Recorder(MemoryGraph& graph, VectorIndex& index, EventLog& log);

    NodeId upsert_node(std::string_view label, NodeKind kind, const EmbeddingVector& embedding,
                       Timestamp ts, std::string_view session_id);
    EdgeId add_edge(NodeId src, NodeId dst, EdgeKind kind, Timestamp ts, double confidence);
    VectorIndex::Replacement replace_document(const std::string& doc_name, std::vector<Chunk> chunks,
                                              Timestamp ts);
    std::size_t remove_doc(const std::string& doc_name, Timestamp ts);
    std::vector<NodeId> prune(std::size_t max_nodes, Timestamp ts);

    // Non-mutating events (turn_recorded, reflection_step, ...).
    std::uint64_t note(EventKind kind, Timestamp ts, nlohmann::json payload);

    MemoryGraph& graph() { return graph_; }
    VectorIndex& index() { return index_; }
    EventLog& log() { return log_; }

private:
    MemoryGraph& graph_;
    VectorIndex& index_;
    EventLog& log_;
    std::mutex mutex_;
};

struct ReplayedState {
    std::unique_ptr<MemoryGraph> graph;
    std::unique_ptr<VectorIndex> index;
    std::map<std::string, std::vector<TurnRecord>> sessions;
    std::map<std::string, Timestamp> session_created; // first sighting
    std::uint64_t last_seq = 0;
};

/// Folds mutation events in seq order into fresh stores. Reporting events
/// (answer_generated, reflection_step, llm_error, fallback_extract) are
/// skipped; turn_recorded rebuilds per-session turn history. Any divergence
/// between a recorded id and the replayed one is a CorruptLog.
ReplayedState replay(const std::vector<Event>& events, const GraphConfig& graph_config,
                     std::size_t dimension);

// SHA-256 over the canonical JSON snapshot of both stores.
nlohmann::json canonical_snapshot(const MemoryGraph& graph, const VectorIndex& index);
std::string state_hash(const MemoryGraph& graph, const VectorIndex& index);

enum class VerifyStatus { ok, no_footer, log_digest_mismatch, state_hash_mismatch, corrupt };

struct VerifyResult {
    VerifyStatus status = VerifyStatus::ok;
    std::string message;
    std::string state_hash;
};

// Re-hashes the log body and replays it, comparing against the footer.
VerifyResult verify_log_text(std::string_view text, const GraphConfig& graph_config,
                             std::size_t dimension);

} // namespace mnemos
