#include "mnemos/engine.hpp"

#include "mnemos/prompts.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>

namespace mnemos {

nlohmann::json to_json(const SessionRecord& s) {
    return {{"session_id", s.session_id}, {"created_at", s.created_at}, {"turn_count", s.turn_count}};
}

std::string random_uuid() {
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::uint64_t hi, lo;
    {
        std::lock_guard lock(mutex);
        hi = rng();
        lo = rng();
    }
    hi = (hi & 0xffffffffffff0fffULL) | 0x0000000000004000ULL;
    lo = (lo & 0x3fffffffffffffffULL) | 0x8000000000000000ULL;
    char buf[37];
    std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%012llx", static_cast<unsigned>(hi >> 32),
                  static_cast<unsigned>((hi >> 16) & 0xffff), static_cast<unsigned>(hi & 0xffff),
                  static_cast<unsigned>(lo >> 48),
                  static_cast<unsigned long long>(lo & 0xffffffffffffULL));
    return buf;
}

Engine::Engine(EngineConfig config, EngineOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
    if (!options_.clock) {
        options_.clock = [] {
            return std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                .count();
        };
    }
    if (!options_.session_ids) options_.session_ids = random_uuid;

    if (config_.embedder.provider == "remote") {
        embedder_ = std::make_unique<RemoteEmbedder>(config_.embedder.endpoint, config_.embedder.dimension);
    } else {
        embedder_ = std::make_unique<HashingEmbedder>(config_.embedder.dimension);
    }

    std::map<std::string, std::vector<TurnRecord>> restored;
    if (config_.event_log) {
        log_ = std::make_unique<EventLog>(*config_.event_log);
        auto state = replay(log_->events(), config_.graph, embedder_->dimension());
        graph_ = std::move(state.graph);
        index_ = std::move(state.index);
        restored = std::move(state.sessions);
        sessions_ = std::move(state.session_created);
    } else {
        log_ = std::make_unique<EventLog>();
        graph_ = std::make_unique<MemoryGraph>(config_.graph);
        index_ = std::make_unique<VectorIndex>(embedder_->dimension());
    }
    recorder_ = std::make_unique<Recorder>(*graph_, *index_, *log_);

    build_llm();

    auto prompts = config_.prompts_dir ? PromptSet::load(*config_.prompts_dir) : PromptSet::builtin();
    orchestrator_ = std::make_unique<Orchestrator>(*recorder_, *embedder_, *gateway_, std::move(prompts),
                                                   config_.orchestrator);
    orchestrator_->restore_sessions(restored);
    ingestor_ = std::make_unique<Ingestor>(*recorder_, *embedder_, config_.chunking);
}

Engine::~Engine() = default;

void Engine::build_llm() {
    std::map<std::string, std::shared_ptr<LlmBackend>> backends;
    std::map<LlmRole, RoleBinding> bindings;
    const char* key = std::getenv("MNEMOS_LLM_API_KEY");
    for (const auto& [role, rc] : config_.roles) {
        RoleBinding b{"", rc.model, rc.temperature, rc.max_tokens};
        if (rc.backend == "mock") {
            if (!mock_) {
                mock_ = options_.mock;
                if (!mock_) {
                    mock_ = std::make_shared<ScriptedBackend>("mock");
                    if (config_.mock_script) mock_->load_file(config_.mock_script->string());
                }
                backends[mock_->id()] = mock_;
            }
            b.backend_id = mock_->id();
        } else {
            b.backend_id = "http:" + rc.endpoint;
            if (!backends.contains(b.backend_id)) {
                backends[b.backend_id] =
                    std::make_shared<HttpChatBackend>(b.backend_id, rc.endpoint, key ? key : "");
            }
        }
        bindings[role] = b;
    }
    gateway_ = std::make_shared<LlmGateway>(std::move(bindings), std::move(backends), config_.retry,
                                            options_.sleeper);
    gateway_->set_error_sink([this](const LlmErrorReport& r) {
        recorder_->note(EventKind::llm_error, r.ts > 0 ? r.ts : now(),
                        {{"session_id", r.session_id},
                         {"role", to_string(r.role)},
                         {"backend_id", r.backend_id},
                         {"kind", r.kind},
                         {"message", r.message},
                         {"attempt", r.attempt}});
    });
}

Timestamp Engine::now() const { return options_.clock(); }

SessionRecord Engine::record_of(const std::string& id, Timestamp created_at) const {
    return {id, created_at, orchestrator_->turns(id).size()};
}

SessionRecord Engine::register_session(const std::string& id, Timestamp ts) {
    if (ts <= 0) throw InvalidArgument("timestamp must be positive");
    {
        std::lock_guard lock(sessions_mutex_);
        auto [it, inserted] = sessions_.try_emplace(id, ts);
        if (!inserted) return record_of(id, it->second);
        recorder_->note(EventKind::session_created, ts, {{"session_id", id}});
    }
    orchestrator_->ensure_session(id);
    return {id, ts, 0};
}

SessionRecord Engine::create_session(std::optional<Timestamp> ts) {
    for (;;) {
        auto id = options_.session_ids();
        if (!session(id)) return register_session(id, ts.value_or(now()));
    }
}

SessionRecord Engine::open_session(const std::string& id, std::optional<Timestamp> ts) {
    if (id.empty()) throw InvalidArgument("session id must not be empty");
    return register_session(id, ts.value_or(now()));
}

std::optional<SessionRecord> Engine::session(const std::string& id) const {
    Timestamp created;
    {
        std::lock_guard lock(sessions_mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) return std::nullopt;
        created = it->second;
    }
    return record_of(id, created);
}

std::vector<SessionRecord> Engine::sessions() const {
    std::map<std::string, Timestamp> copy;
    {
        std::lock_guard lock(sessions_mutex_);
        copy = sessions_;
    }
    std::vector<SessionRecord> out;
    for (const auto& [id, created] : copy) out.push_back(record_of(id, created));
    return out;
}

std::vector<TurnRecord> Engine::messages(const std::string& session_id) const {
    if (!session(session_id)) throw NotFound("unknown session " + session_id);
    return orchestrator_->turns(session_id);
}

AnswerTrace Engine::send_message(const std::string& session_id, std::string_view text,
                                 std::optional<Timestamp> ts) {
    if (!session(session_id)) throw NotFound("unknown session " + session_id);
    return orchestrator_->answer_traced(session_id, text, ts.value_or(now()));
}

RecordedTurn Engine::record_turn(const std::string& session_id, std::string_view text, Speaker speaker,
                                 std::optional<Timestamp> ts) {
    if (!session(session_id)) throw NotFound("unknown session " + session_id);
    return orchestrator_->record_turn(session_id, text, ts.value_or(now()), speaker);
}

IngestReport Engine::ingest(const std::string& name, std::string_view text, std::optional<Timestamp> ts) {
    return ingestor_->ingest_document(name, text, ts.value_or(now()));
}

std::vector<ScoredNode> Engine::query_nodes(std::string_view q, std::optional<TimeWindow> window,
                                            std::size_t limit, std::optional<Timestamp> at) const {
    NodeQuery query;
    query.embedding = embedder_->embed(q);
    query.now = at.value_or(now());
    query.k = limit;
    query.window = window;
    return graph_->query_nodes(query);
}

Subgraph Engine::neighborhood(NodeId id, int hops) const { return graph_->neighborhood({id}, hops); }

std::vector<Event> Engine::events_since(std::uint64_t seq) const { return log_->since(seq); }

std::string Engine::state_hash() const { return mnemos::state_hash(*graph_, *index_); }

void Engine::seal() { log_->seal(state_hash()); }

} // namespace mnemos
