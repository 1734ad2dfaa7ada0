#pragma once

#include "mnemos/embedder.hpp"
#include "mnemos/extraction.hpp"
#include "mnemos/llm_gateway.hpp"
#include "mnemos/memory_graph.hpp"
#include "mnemos/persistence.hpp"
#include "mnemos/prompts.hpp"
#include "mnemos/vector_index.hpp"

#include <json.hpp>

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

namespace mnemos {

enum class Speaker { user, assistant };

std::string to_string(Speaker s);

struct ReflectionConfig {
    double threshold = 0.8;
    int max_iterations = 3;
};

// Iteration i retrieves base_nodes * 2^i nodes, base_hops + i hops and
// base_chunks * 2^i chunks.
struct RetrievalSchedule {
    std::size_t base_nodes = 5;
    int base_hops = 1;
    std::size_t base_chunks = 3;
    std::size_t seed_turns = 3;
    std::size_t history_turns = 6;
};

struct OrchestratorConfig {
    ReflectionConfig reflection;
    RetrievalSchedule retrieval;
    std::size_t prune_max_nodes = 0; // 0 disables pruning
};

struct ContextChunk {
    ChunkId id = 0;
    double cosine = 0.0;
    std::string doc_name;
    std::size_t ordinal = 0;
    std::string text;
};

struct ContextBundle {
    std::vector<ScoredNode> scored_nodes;
    Subgraph subgraph;
    std::vector<ContextChunk> chunks;
    int iteration = 0;
    bool unfiltered_chunks = false; // graph-guided filter found nothing

    std::set<NodeId> node_ids() const;
    bool has_label(std::string_view label) const;
};

struct Critique {
    double score = 0.0;
    std::vector<std::string> missing;
};

// Reads {"score", "missing"}; score is clamped to [0, 1]. Throws
// UnusableOutput when score is absent or not a number.
Critique critique_from_json(const nlohmann::json& payload);

struct ContextSize {
    std::size_t nodes = 0;
    std::size_t chunks = 0;
    friend bool operator==(const ContextSize&, const ContextSize&) = default;
};

struct AnswerBundle {
    std::string answer;
    int iterations_used = 0;
    double final_score = 0.0;
    std::vector<ContextSize> context_sizes;
    std::vector<NodeId> cited_node_ids;
    std::vector<ChunkId> cited_chunk_ids;
};

nlohmann::json to_json(const AnswerBundle& b);

struct IterationTrace {
    ContextBundle context;
    std::optional<std::string> answer; // empty when the answerer failed
    Critique critique;
};

struct AnswerTrace {
    AnswerBundle bundle;
    std::vector<IterationTrace> iterations;
    std::size_t selected_iteration = 0;
};

struct RecordedTurn {
    GraphDelta delta;
    NodeId turn_node = 0;
    std::vector<NodeId> entity_nodes;
    bool used_fallback = false;
};

/// Captures turns into the graph, assembles graph + vector context and runs
/// the answer / critique loop.
///
/// Calls for one session are served strictly in arrival order; different
/// sessions run concurrently.
class Orchestrator {
public:
    Orchestrator(Recorder& recorder, const Embedder& embedder, LlmGateway& llm, PromptSet prompts,
                 OrchestratorConfig config = {});

    RecordedTurn record_turn(const std::string& session, std::string_view text, Timestamp ts,
                             Speaker speaker = Speaker::user);

    ContextBundle retrieve_context(const std::string& session, std::string_view query,
                                   Timestamp now, int iteration) const;

    AnswerBundle answer(const std::string& session, std::string_view query, Timestamp now);
    AnswerTrace answer_traced(const std::string& session, std::string_view query, Timestamp now);

    std::vector<TurnRecord> turns(const std::string& session) const;
    bool has_session(const std::string& session) const;
    void ensure_session(const std::string& session);
    void restore_sessions(const std::map<std::string, std::vector<TurnRecord>>& sessions);

    // Answerer prompt for a given context; exposed so tests can pin it.
    std::vector<ChatMessage> answerer_messages(const std::string& session, std::string_view query,
                                               Timestamp now, const ContextBundle& ctx,
                                               const std::optional<Critique>& feedback) const;

    const OrchestratorConfig& config() const { return config_; }

private:
    struct SessionState {
        mutable std::mutex mutex;
        std::vector<TurnRecord> turns;

        // FIFO ticket gate
        std::mutex gate_mutex;
        std::condition_variable gate_cv;
        std::uint64_t next_ticket = 0;
        std::uint64_t serving = 0;
    };

    class Turnstile {
    public:
        explicit Turnstile(SessionState& s);
        ~Turnstile();
        Turnstile(const Turnstile&) = delete;
        Turnstile& operator=(const Turnstile&) = delete;

    private:
        SessionState& s_;
    };

    SessionState& session_state(const std::string& session);
    const SessionState* find_session(const std::string& session) const;

    RecordedTurn record_turn_locked(SessionState& state, const std::string& session,
                                    std::string_view text, Timestamp ts, Speaker speaker);
    std::optional<GraphDelta> extract_with_llm(const std::string& session, std::string_view text,
                                               Timestamp ts, Speaker speaker);
    Critique critique(const std::string& session, std::string_view query, const std::string& answer,
                      const ContextBundle& ctx, Timestamp now);

    Recorder& recorder_;
    const Embedder& embedder_;
    LlmGateway& llm_;
    PromptSet prompts_;
    OrchestratorConfig config_;

    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::unique_ptr<SessionState>> sessions_;
};

} // namespace mnemos
