#include "mnemos/orchestrator.hpp"

#include "mnemos/text.hpp"

#include <algorithm>
#include <sstream>

namespace mnemos {

namespace {

constexpr double kMentionConfidence = 1.0;
constexpr double kFollowUpConfidence = 1.0;
const char* const kCriticUnparseable = "critic-unparseable";

std::string render_graph(const Subgraph& g) {
    std::map<NodeId, const ConceptNode*> by_id;
    for (const auto& n : g.nodes) by_id[n.id] = &n;

    std::ostringstream out;
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::Turn) continue;
        out << "- " << n.label << " (" << to_string(n.kind) << ", last mentioned "
            << format_timestamp(n.last_seen) << ")\n";
    }
    for (const auto& e : g.edges) {
        out << by_id.at(e.src)->label << " —[" << to_string(e.kind) << "]→ "
            << by_id.at(e.dst)->label << "\n";
    }
    auto s = out.str();
    return s.empty() ? "(nothing remembered yet)\n" : s;
}

std::string render_chunks(const std::vector<ContextChunk>& chunks) {
    if (chunks.empty()) return "(no documents)\n";
    std::ostringstream out;
    for (const auto& c : chunks) out << "[" << c.doc_name << " #" << c.ordinal << "] " << c.text << "\n";
    return out.str();
}

std::string render_history(const std::vector<TurnRecord>& turns, std::size_t last_n) {
    if (turns.empty()) return "(none)\n";
    std::ostringstream out;
    auto start = turns.size() > last_n ? turns.size() - last_n : 0;
    for (auto i = start; i < turns.size(); ++i) {
        out << turns[i].speaker << " (" << format_timestamp(turns[i].ts) << "): " << turns[i].text
            << "\n";
    }
    return out.str();
}

std::string render_context_summary(const ContextBundle& ctx) {
    std::ostringstream out;
    out << "Concepts:";
    bool any = false;
    for (const auto& n : ctx.subgraph.nodes) {
        if (n.kind == NodeKind::Turn) continue;
        out << (any ? ", " : " ") << n.label;
        any = true;
    }
    if (!any) out << " none";
    out << "\nDocuments:";
    if (ctx.chunks.empty()) out << " none";
    for (std::size_t i = 0; i < ctx.chunks.size(); ++i) {
        out << (i ? ", " : " ") << ctx.chunks[i].doc_name << "#" << ctx.chunks[i].ordinal;
    }
    out << "\n";
    return out.str();
}

} // namespace

std::string to_string(Speaker s) { return s == Speaker::user ? "user" : "assistant"; }

std::set<NodeId> ContextBundle::node_ids() const {
    std::set<NodeId> ids;
    for (const auto& s : scored_nodes) ids.insert(s.id);
    for (const auto& n : subgraph.nodes) ids.insert(n.id);
    return ids;
}

bool ContextBundle::has_label(std::string_view label) const {
    auto key = text::canonical_key(label);
    return std::any_of(subgraph.nodes.begin(), subgraph.nodes.end(),
                       [&](const ConceptNode& n) { return n.canonical_key == key; });
}

Critique critique_from_json(const nlohmann::json& payload) {
    if (!payload.is_object() || !payload.contains("score") || !payload["score"].is_number()) {
        throw UnusableOutput("critic output lacks a numeric score");
    }
    Critique c;
    c.score = std::clamp(payload["score"].get<double>(), 0.0, 1.0);
    if (payload.contains("missing") && payload["missing"].is_array()) {
        for (const auto& m : payload["missing"]) {
            if (m.is_string()) c.missing.push_back(m.get<std::string>());
        }
    }
    return c;
}

nlohmann::json to_json(const AnswerBundle& b) {
    auto sizes = nlohmann::json::array();
    for (const auto& s : b.context_sizes) sizes.push_back({{"nodes", s.nodes}, {"chunks", s.chunks}});
    return {{"answer", b.answer},
            {"iterations_used", b.iterations_used},
            {"final_score", b.final_score},
            {"context_sizes", std::move(sizes)},
            {"cited_node_ids", b.cited_node_ids},
            {"cited_chunk_ids", b.cited_chunk_ids}};
}

// ── Sessions ────────────────────────────────────────────────────────

Orchestrator::Turnstile::Turnstile(SessionState& s) : s_(s) {
    std::unique_lock lock(s_.gate_mutex);
    auto ticket = s_.next_ticket++;
    s_.gate_cv.wait(lock, [&] { return s_.serving == ticket; });
}

Orchestrator::Turnstile::~Turnstile() {
    {
        std::lock_guard lock(s_.gate_mutex);
        ++s_.serving;
    }
    s_.gate_cv.notify_all();
}

Orchestrator::Orchestrator(Recorder& recorder, const Embedder& embedder, LlmGateway& llm,
                           PromptSet prompts, OrchestratorConfig config)
    : recorder_(recorder),
      embedder_(embedder),
      llm_(llm),
      prompts_(std::move(prompts)),
      config_(config) {
    if (config_.reflection.max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
    if (config_.retrieval.base_nodes == 0 || config_.retrieval.base_chunks == 0) {
        throw InvalidArgument("retrieval sizes must be positive");
    }
}

Orchestrator::SessionState& Orchestrator::session_state(const std::string& session) {
    {
        std::shared_lock lock(sessions_mutex_);
        if (auto it = sessions_.find(session); it != sessions_.end()) return *it->second;
    }
    std::unique_lock lock(sessions_mutex_);
    auto& slot = sessions_[session];
    if (!slot) slot = std::make_unique<SessionState>();
    return *slot;
}

const Orchestrator::SessionState* Orchestrator::find_session(const std::string& session) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(session);
    return it == sessions_.end() ? nullptr : it->second.get();
}

bool Orchestrator::has_session(const std::string& session) const {
    return find_session(session) != nullptr;
}

void Orchestrator::ensure_session(const std::string& session) { session_state(session); }

std::vector<TurnRecord> Orchestrator::turns(const std::string& session) const {
    const auto* s = find_session(session);
    if (!s) return {};
    std::lock_guard lock(s->mutex);
    return s->turns;
}

void Orchestrator::restore_sessions(const std::map<std::string, std::vector<TurnRecord>>& sessions) {
    for (const auto& [id, turns] : sessions) {
        auto& s = session_state(id);
        std::lock_guard lock(s.mutex);
        s.turns = turns;
    }
}

// ── Capture ─────────────────────────────────────────────────────────

std::optional<GraphDelta> Orchestrator::extract_with_llm(const std::string& session,
                                                         std::string_view text, Timestamp ts,
                                                         Speaker speaker) {
    std::vector<ChatMessage> messages = {
        {ChatMessage::Role::system, prompts_.extractor_system},
        {ChatMessage::Role::user,
         render_template(prompts_.extractor_user,
                         {{"speaker", to_string(speaker)}, {"text", std::string(text)}})},
    };
    std::string reason;
    try {
        auto completion = llm_.complete(LlmRole::Extractor, messages, {{}, {}, session, ts});
        return delta_from_extractor_json(parse_json_payload(completion.text), text);
    } catch (const UnusableOutput& e) {
        reason = std::string("unusable extractor output: ") + e.what();
    } catch (const Error& e) {
        reason = std::string("extractor unavailable: ") + e.what();
    }
    recorder_.note(EventKind::fallback_extract, ts, {{"session_id", session}, {"reason", reason}});
    return std::nullopt;
}

RecordedTurn Orchestrator::record_turn(const std::string& session, std::string_view text,
                                       Timestamp ts, Speaker speaker) {
    auto& state = session_state(session);
    Turnstile gate(state);
    return record_turn_locked(state, session, text, ts, speaker);
}

RecordedTurn Orchestrator::record_turn_locked(SessionState& state, const std::string& session,
                                              std::string_view raw_text, Timestamp ts,
                                              Speaker speaker) {
    auto turn_text = text::trim(raw_text);
    if (turn_text.empty()) throw InvalidArgument("turn text must not be empty");
    if (ts <= 0) throw InvalidArgument("timestamp must be positive");

    RecordedTurn out;
    if (auto delta = extract_with_llm(session, turn_text, ts, speaker)) {
        out.delta = std::move(*delta);
    } else {
        out.delta = fallback_extract(turn_text);
        out.used_fallback = true;
    }

    auto& graph = recorder_.graph();
    out.turn_node = recorder_.upsert_node(turn_text, NodeKind::Turn, embedder_.embed(turn_text), ts,
                                          session);

    std::map<std::string, NodeId> by_key;
    for (const auto& spec : out.delta.nodes) {
        auto id = recorder_.upsert_node(spec.label, spec.kind, embedder_.embed(spec.label), ts, session);
        by_key.emplace(text::canonical_key(spec.label), id);
        if (id != out.turn_node &&
            std::find(out.entity_nodes.begin(), out.entity_nodes.end(), id) == out.entity_nodes.end()) {
            out.entity_nodes.push_back(id);
        }
    }

    auto resolve = [&](const std::string& label) -> std::optional<NodeId> {
        auto key = text::canonical_key(label);
        if (auto it = by_key.find(key); it != by_key.end()) return it->second;
        return graph.find_by_key(key);
    };
    for (const auto& spec : out.delta.edges) {
        auto src = resolve(spec.src_label);
        auto dst = resolve(spec.dst_label);
        if (!src || !dst || *src == *dst) continue;
        recorder_.add_edge(*src, *dst, spec.kind, ts, spec.confidence);
    }
    for (NodeId id : out.entity_nodes) {
        recorder_.add_edge(out.turn_node, id, EdgeKind::MENTIONS, ts, kMentionConfidence);
    }

    {
        std::lock_guard lock(state.mutex);
        if (!state.turns.empty()) {
            NodeId prev = state.turns.back().node_id;
            if (prev != out.turn_node && graph.node(prev)) {
                recorder_.add_edge(prev, out.turn_node, EdgeKind::FOLLOWS_UP, ts, kFollowUpConfidence);
            }
        }
        recorder_.note(EventKind::turn_recorded, ts,
                       {{"session_id", session},
                        {"speaker", to_string(speaker)},
                        {"text", turn_text},
                        {"turn_node_id", out.turn_node}});
        state.turns.push_back({to_string(speaker), turn_text, ts, out.turn_node});
    }

    if (config_.prune_max_nodes > 0) recorder_.prune(config_.prune_max_nodes, ts);
    return out;
}

// ── Retrieval ───────────────────────────────────────────────────────

ContextBundle Orchestrator::retrieve_context(const std::string& session, std::string_view query,
                                             Timestamp now, int iteration) const {
    if (iteration < 0) throw InvalidArgument("iteration must be >= 0");
    const auto& sched = config_.retrieval;
    const auto& graph = recorder_.graph();
    const auto& index = recorder_.index();

    ContextBundle ctx;
    ctx.iteration = iteration;

    std::vector<NodeId> seeds;
    if (const auto* s = find_session(session)) {
        std::lock_guard lock(s->mutex);
        for (auto it = s->turns.rbegin(); it != s->turns.rend() && seeds.size() < sched.seed_turns; ++it) {
            if (std::find(seeds.begin(), seeds.end(), it->node_id) == seeds.end()) {
                seeds.push_back(it->node_id);
            }
        }
    }

    auto query_vec = embedder_.embed(query);
    NodeQuery q;
    q.embedding = query_vec;
    q.now = now;
    q.k = sched.base_nodes << iteration;
    q.seeds = seeds;
    ctx.scored_nodes = graph.query_nodes(q);

    if (!ctx.scored_nodes.empty()) {
        std::vector<NodeId> ids;
        for (const auto& s : ctx.scored_nodes) ids.push_back(s.id);
        ctx.subgraph = graph.neighborhood(ids, sched.base_hops + iteration);
    }

    if (index.size() > 0) {
        auto k_chunks = sched.base_chunks << iteration;
        std::set<std::string> keys;
        for (const auto& n : ctx.subgraph.nodes) keys.insert(n.canonical_key);
        std::vector<SearchHit> hits;
        if (!keys.empty()) hits = index.knn(query_vec, k_chunks, keys);
        if (hits.empty()) {
            hits = index.knn(query_vec, k_chunks);
            ctx.unfiltered_chunks = true;
        }
        for (const auto& h : hits) {
            if (auto c = index.get(h.chunk_id)) {
                ctx.chunks.push_back({h.chunk_id, h.cosine, c->doc_name, c->ordinal, c->text});
            }
        }
    }
    return ctx;
}

// ── Answering ───────────────────────────────────────────────────────

std::vector<ChatMessage> Orchestrator::answerer_messages(const std::string& session,
                                                         std::string_view query, Timestamp now,
                                                         const ContextBundle& ctx,
                                                         const std::optional<Critique>& feedback) const {
    std::string feedback_text;
    if (feedback && !feedback->missing.empty()) {
        feedback_text = "\nA reviewer found the previous draft lacking:";
        for (const auto& m : feedback->missing) feedback_text += " " + m + ";";
        feedback_text.back() = '\n';
    }
    auto user = render_template(prompts_.answerer_user,
                                {{"now", format_timestamp(now)},
                                 {"graph", render_graph(ctx.subgraph)},
                                 {"chunks", render_chunks(ctx.chunks)},
                                 {"history", render_history(turns(session), config_.retrieval.history_turns)},
                                 {"feedback", feedback_text},
                                 {"query", std::string(query)}});
    return {{ChatMessage::Role::system, prompts_.answerer_system}, {ChatMessage::Role::user, user}};
}

Critique Orchestrator::critique(const std::string& session, std::string_view query,
                                const std::string& answer, const ContextBundle& ctx, Timestamp now) {
    std::vector<ChatMessage> messages = {
        {ChatMessage::Role::system, prompts_.critic_system},
        {ChatMessage::Role::user,
         render_template(prompts_.critic_user, {{"query", std::string(query)},
                                                {"answer", answer},
                                                {"context", render_context_summary(ctx)}})},
    };
    try {
        auto completion = llm_.complete(LlmRole::Critic, messages, {{}, {}, session, now});
        return critique_from_json(parse_json_payload(completion.text));
    } catch (const Error&) {
        return {0.0, {kCriticUnparseable}};
    }
}

AnswerBundle Orchestrator::answer(const std::string& session, std::string_view query, Timestamp now) {
    return answer_traced(session, query, now).bundle;
}

AnswerTrace Orchestrator::answer_traced(const std::string& session, std::string_view raw_query,
                                        Timestamp now) {
    auto query = text::trim(raw_query);
    if (query.empty()) throw InvalidArgument("query must not be empty");

    auto& state = session_state(session);
    Turnstile gate(state);
    record_turn_locked(state, session, query, now, Speaker::user);

    AnswerTrace trace;
    std::optional<std::size_t> best;
    std::optional<Critique> feedback;
    const auto& refl = config_.reflection;

    for (int i = 0; i < refl.max_iterations; ++i) {
        IterationTrace it;
        it.context = retrieve_context(session, query, now, i);

        bool accepted = false;
        try {
            auto messages = answerer_messages(session, query, now, it.context, feedback);
            it.answer = llm_.complete(LlmRole::Answerer, messages, {{}, {}, session, now}).text;
        } catch (const Error&) {
            it.critique = {0.0, {}};
        }

        if (it.answer) {
            it.critique = critique(session, query, *it.answer, it.context, now);
            accepted = it.critique.score >= refl.threshold;
        }
        recorder_.note(EventKind::reflection_step, now,
                       {{"session_id", session},
                        {"iteration", i},
                        {"answered", it.answer.has_value()},
                        {"score", it.critique.score},
                        {"missing", it.critique.missing},
                        {"accepted", accepted},
                        {"node_count", it.context.subgraph.nodes.size()},
                        {"chunk_count", it.context.chunks.size()}});

        trace.bundle.context_sizes.push_back({it.context.subgraph.nodes.size(), it.context.chunks.size()});
        if (it.answer && (!best || it.critique.score > trace.iterations[*best].critique.score)) {
            best = trace.iterations.size();
        }
        feedback = it.critique;
        trace.iterations.push_back(std::move(it));
        if (accepted) break;
    }

    if (!best) throw LlmExhausted("answerer failed on every reflection iteration");

    const auto& chosen = trace.iterations[*best];
    auto& bundle = trace.bundle;
    trace.selected_iteration = *best;
    bundle.answer = *chosen.answer;
    bundle.iterations_used = static_cast<int>(trace.iterations.size());
    bundle.final_score = chosen.critique.score;
    for (const auto& n : chosen.context.subgraph.nodes) bundle.cited_node_ids.push_back(n.id);
    for (const auto& c : chosen.context.chunks) bundle.cited_chunk_ids.push_back(c.id);

    record_turn_locked(state, session, bundle.answer, now, Speaker::assistant);
    recorder_.note(EventKind::answer_generated, now,
                   {{"session_id", session},
                    {"query", query},
                    {"answer", bundle.answer},
                    {"iterations_used", bundle.iterations_used},
                    {"final_score", bundle.final_score},
                    {"selected_iteration", *best}});
    return trace;
}

} // namespace mnemos
