#pragma once

#include "mnemos/config.hpp"
#include "mnemos/embedder.hpp"
#include "mnemos/ingestion.hpp"
#include "mnemos/llm_gateway.hpp"
#include "mnemos/memory_graph.hpp"
#include "mnemos/orchestrator.hpp"
#include "mnemos/persistence.hpp"
#include "mnemos/vector_index.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mnemos {

struct SessionRecord {
    std::string session_id;
    Timestamp created_at = 0;
    std::size_t turn_count = 0;
};

nlohmann::json to_json(const SessionRecord& s);

struct EngineOptions {
    // Replaces the config's mock_script for every role bound to "mock".
    std::shared_ptr<ScriptedBackend> mock;
    LlmGateway::Sleeper sleeper;
    std::function<Timestamp()> clock;             // default: system clock, ms
    std::function<std::string()> session_ids;     // default: random uuid v4
};

// Random RFC 4122 version-4 identifier.
std::string random_uuid();

/// One assistant instance: stores, log, LLM routing, orchestrator and
/// ingestion wired together from an EngineConfig.
///
/// If the config names an event log file that already has events, the stores
/// and session histories are rebuilt from it before anything else happens.
class Engine {
public:
    explicit Engine(EngineConfig config, EngineOptions options = {});
    ~Engine();

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    SessionRecord create_session(std::optional<Timestamp> ts = {});
    // Creates the session under the given id if it does not exist yet.
    SessionRecord open_session(const std::string& id, std::optional<Timestamp> ts = {});
    std::optional<SessionRecord> session(const std::string& id) const;
    std::vector<SessionRecord> sessions() const;

    // Throws NotFound for unknown sessions.
    std::vector<TurnRecord> messages(const std::string& session_id) const;
    AnswerTrace send_message(const std::string& session_id, std::string_view text,
                             std::optional<Timestamp> ts = {});
    RecordedTurn record_turn(const std::string& session_id, std::string_view text, Speaker speaker,
                             std::optional<Timestamp> ts = {});

    IngestReport ingest(const std::string& name, std::string_view text, std::optional<Timestamp> ts = {});

    std::vector<ScoredNode> query_nodes(std::string_view q, std::optional<TimeWindow> window,
                                        std::size_t limit, std::optional<Timestamp> now = {}) const;
    Subgraph neighborhood(NodeId id, int hops) const;
    std::vector<Event> events_since(std::uint64_t seq) const;

    std::string state_hash() const;
    // Writes the footer (body digest + state hash) to the log file, if any.
    void seal();

    Timestamp now() const;

    const EngineConfig& config() const { return config_; }
    const Embedder& embedder() const { return *embedder_; }
    MemoryGraph& graph() { return *graph_; }
    const MemoryGraph& graph() const { return *graph_; }
    VectorIndex& index() { return *index_; }
    const VectorIndex& index() const { return *index_; }
    EventLog& log() { return *log_; }
    Recorder& recorder() { return *recorder_; }
    LlmGateway& gateway() { return *gateway_; }
    Orchestrator& orchestrator() { return *orchestrator_; }
    // Null when no role is bound to the mock backend.
    std::shared_ptr<ScriptedBackend> mock() const { return mock_; }

private:
    void build_llm();
    SessionRecord register_session(const std::string& id, Timestamp ts);
    SessionRecord record_of(const std::string& id, Timestamp created_at) const;

    EngineConfig config_;
    EngineOptions options_;
    std::unique_ptr<Embedder> embedder_;
    std::unique_ptr<MemoryGraph> graph_;
    std::unique_ptr<VectorIndex> index_;
    std::unique_ptr<EventLog> log_;
    std::unique_ptr<Recorder> recorder_;
    std::shared_ptr<ScriptedBackend> mock_;
    std::shared_ptr<LlmGateway> gateway_;
    std::unique_ptr<Orchestrator> orchestrator_;
    std::unique_ptr<Ingestor> ingestor_;

    mutable std::mutex sessions_mutex_;
    std::map<std::string, Timestamp> sessions_;
};

} // namespace mnemos
