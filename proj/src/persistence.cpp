#include "mnemos/persistence.hpp"

#include <openssl/evp.h>

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mnemos {

namespace {

constexpr std::array<const char*, 11> kEventKindNames = {
    "turn_recorded",    "node_upserted",   "edge_added",       "chunk_added", "doc_removed",
    "answer_generated", "reflection_step", "fallback_extract", "llm_error",   "nodes_pruned",
    "session_created"};

std::string footer_line(const LogFooter& f) {
    nlohmann::json j = {
        {"footer", {{"last_seq", f.last_seq}, {"log_sha256", f.log_sha256}, {"state_hash", f.state_hash}}}};
    return j.dump() + "\n";
}

Event event_from_json(const nlohmann::json& j, std::uint64_t expected_seq) {
    if (!j.is_object()) throw CorruptLog(expected_seq, "event line is not an object");
    for (const char* key : {"seq", "ts", "kind", "payload"}) {
        if (!j.contains(key)) throw CorruptLog(expected_seq, std::string("event lacks '") + key + "'");
    }
    if (!j["seq"].is_number_unsigned()) throw CorruptLog(expected_seq, "seq is not an unsigned integer");
    Event e;
    e.seq = j["seq"].get<std::uint64_t>();
    if (e.seq != expected_seq) throw CorruptLog(e.seq, "expected seq " + std::to_string(expected_seq));
    if (!j["ts"].is_number_integer()) throw CorruptLog(e.seq, "ts is not an integer");
    e.ts = j["ts"].get<Timestamp>();
    auto kind = j["kind"].is_string() ? event_kind_from_string(j["kind"].get<std::string>())
                                      : std::nullopt;
    if (!kind) throw CorruptLog(e.seq, "unknown event kind " + j["kind"].dump());
    e.kind = *kind;
    if (!j["payload"].is_object()) throw CorruptLog(e.seq, "payload is not an object");
    e.payload = j["payload"];
    return e;
}

void write_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        auto n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) throw IoError("event log write failed");
        off += static_cast<std::size_t>(n);
    }
}

nlohmann::json chunk_payload(const Chunk& c) {
    return {{"chunk_id", c.id},          {"doc_name", c.doc_name},
            {"ordinal", c.ordinal},      {"text", c.text},
            {"embedding", c.embedding.values}, {"concept_keys", c.concept_keys},
            {"created_at", c.created_at}};
}

} // namespace

std::string to_string(EventKind kind) { return kEventKindNames[static_cast<std::size_t>(kind)]; }

std::optional<EventKind> event_kind_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kEventKindNames.size(); ++i) {
        if (s == kEventKindNames[i]) return static_cast<EventKind>(i);
    }
    return std::nullopt;
}

nlohmann::json to_json(const Event& e) {
    return {{"seq", e.seq}, {"ts", e.ts}, {"kind", to_string(e.kind)}, {"payload", e.payload}};
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

// ── EventLog ────────────────────────────────────────────────────────

EventLog::EventLog() = default;

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(*path_)) {
        auto contents = read_log_file(*path_);
        events_ = std::move(contents.events);
        body_bytes_ = contents.body_bytes;
        if (contents.footer || std::filesystem::file_size(*path_) != body_bytes_) {
            std::filesystem::resize_file(*path_, body_bytes_);
        }
    }
    fd_ = ::open(path_->c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open event log " + path_->string());
}

EventLog::~EventLog() {
    if (fd_ >= 0) ::close(fd_);
}

void EventLog::write_line(const std::string& line) {
    if (fd_ < 0) return;
    write_all(fd_, line);
    if (::fdatasync(fd_) != 0) throw IoError("event log sync failed");
}

void EventLog::drop_footer() {
    if (!sealed_) return;
    if (path_) std::filesystem::resize_file(*path_, body_bytes_);
    sealed_ = false;
}

std::uint64_t EventLog::append(EventKind kind, Timestamp ts, nlohmann::json payload) {
    if (!payload.is_object()) throw InvalidArgument("event payload must be a JSON object");
    std::unique_lock lock(mutex_);
    drop_footer();
    Event e{events_.size() + 1, ts, kind, std::move(payload)};
    auto line = to_json(e).dump() + "\n";
    write_line(line);
    body_bytes_ += line.size();
    events_.push_back(std::move(e));
    return events_.back().seq;
}

std::vector<Event> EventLog::since(std::uint64_t seq) const {
    std::shared_lock lock(mutex_);
    if (seq >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(seq), events_.end()};
}

std::uint64_t EventLog::last_seq() const {
    std::shared_lock lock(mutex_);
    return events_.size();
}

void EventLog::seal(const std::string& state_hash) {
    std::unique_lock lock(mutex_);
    drop_footer();
    if (fd_ < 0) return;
    std::ifstream in(*path_, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    LogFooter footer{events_.size(), sha256_hex(ss.str()), state_hash};
    write_line(footer_line(footer));
    sealed_ = true;
}

// ── Parsing ─────────────────────────────────────────────────────────

LogContents parse_log(std::string_view text) {
    LogContents out;
    std::size_t pos = 0;
    std::size_t body_end = 0;
    std::size_t lineno = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto line_end = nl == std::string_view::npos ? text.size() : nl;
        auto line = text.substr(pos, line_end - pos);
        ++lineno;
        std::uint64_t expected = out.events.size() + 1;
        if (out.footer) throw CorruptLog(expected, "data after footer");
        if (line.empty()) throw CorruptLog(expected, "blank line " + std::to_string(lineno));

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw CorruptLog(expected, "unreadable line " + std::to_string(lineno));
        }
        if (j.is_object() && j.contains("footer")) {
            const auto& f = j["footer"];
            try {
                out.footer = LogFooter{f.at("last_seq").get<std::uint64_t>(),
                                       f.at("log_sha256").get<std::string>(),
                                       f.at("state_hash").get<std::string>()};
            } catch (const nlohmann::json::exception&) {
                throw CorruptLog(expected, "malformed footer");
            }
            if (j.size() != 1 || f.size() != 3) throw CorruptLog(expected, "malformed footer");
            if (nl == std::string_view::npos) throw CorruptLog(expected, "unterminated footer");
        } else {
            if (nl == std::string_view::npos) throw CorruptLog(expected, "unterminated event line");
            out.events.push_back(event_from_json(j, expected));
            body_end = line_end + 1;
        }
        pos = line_end + 1;
    }
    out.body_bytes = body_end;
    out.body_sha256 = sha256_hex(text.substr(0, body_end));
    return out;
}

LogContents read_log_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open log " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_log(ss.str());
}

// ── Recorder ────────────────────────────────────────────────────────

Recorder::Recorder(MemoryGraph& graph, VectorIndex& index, EventLog& log)
    : graph_(graph), index_(index), log_(log) {}

NodeId Recorder::upsert_node(std::string_view label, NodeKind kind,
                             const EmbeddingVector& embedding, Timestamp ts,
                             std::string_view session_id) {
    std::lock_guard lock(mutex_);
    auto id = graph_.upsert_node(label, kind, embedding, ts, session_id);
    log_.append(EventKind::node_upserted, ts,
                {{"node_id", id},
                 {"label", std::string(label)},
                 {"kind", to_string(kind)},
                 {"embedding", embedding.values},
                 {"session_id", std::string(session_id)}});
    return id;
}

EdgeId Recorder::add_edge(NodeId src, NodeId dst, EdgeKind kind, Timestamp ts, double confidence) {
    std::lock_guard lock(mutex_);
    auto id = graph_.add_edge(src, dst, kind, ts, confidence);
    log_.append(EventKind::edge_added, ts,
                {{"edge_id", id},
                 {"src", src},
                 {"dst", dst},
                 {"kind", to_string(kind)},
                 {"confidence", confidence}});
    return id;
}

VectorIndex::Replacement Recorder::replace_document(const std::string& doc_name,
                                                    std::vector<Chunk> chunks, Timestamp ts) {
    std::lock_guard lock(mutex_);
    auto copies = chunks;
    auto result = index_.replace_document(doc_name, std::move(chunks));
    if (result.removed > 0) {
        log_.append(EventKind::doc_removed, ts, {{"doc_name", doc_name}, {"removed", result.removed}});
    }
    for (std::size_t i = 0; i < copies.size(); ++i) {
        copies[i].id = result.ids[i];
        log_.append(EventKind::chunk_added, ts, chunk_payload(copies[i]));
    }
    return result;
}

std::size_t Recorder::remove_doc(const std::string& doc_name, Timestamp ts) {
    std::lock_guard lock(mutex_);
    auto removed = index_.remove_doc(doc_name);
    if (removed > 0) {
        log_.append(EventKind::doc_removed, ts, {{"doc_name", doc_name}, {"removed", removed}});
    }
    return removed;
}

std::vector<NodeId> Recorder::prune(std::size_t max_nodes, Timestamp ts) {
    std::lock_guard lock(mutex_);
    auto removed = graph_.prune(max_nodes, ts);
    if (!removed.empty()) {
        log_.append(EventKind::nodes_pruned, ts,
                    {{"max_nodes", max_nodes}, {"now", ts}, {"removed", removed}});
    }
    return removed;
}

std::uint64_t Recorder::note(EventKind kind, Timestamp ts, nlohmann::json payload) {
    std::lock_guard lock(mutex_);
    return log_.append(kind, ts, std::move(payload));
}

// ── Replay ──────────────────────────────────────────────────────────

ReplayedState replay(const std::vector<Event>& events, const GraphConfig& graph_config,
                     std::size_t dimension) {
    ReplayedState st;
    st.graph = std::make_unique<MemoryGraph>(graph_config);
    st.index = std::make_unique<VectorIndex>(dimension);

    std::uint64_t expected = 1;
    for (const auto& e : events) {
        if (e.seq != expected) throw CorruptLog(e.seq, "expected seq " + std::to_string(expected));
        ++expected;
        const auto& p = e.payload;
        auto diverged = [&](const std::string& what) { throw CorruptLog(e.seq, "replay diverged: " + what); };
        try {
            switch (e.kind) {
            case EventKind::node_upserted: {
                auto kind = node_kind_from_string(p.at("kind").get<std::string>());
                if (!kind) diverged("bad node kind");
                EmbeddingVector emb{p.at("embedding").get<std::vector<double>>()};
                auto id = st.graph->upsert_node(p.at("label").get<std::string>(), *kind, emb, e.ts,
                                                p.at("session_id").get<std::string>());
                if (id != p.at("node_id").get<NodeId>()) diverged("node id");
                break;
            }
            case EventKind::edge_added: {
                auto kind = edge_kind_from_string(p.at("kind").get<std::string>());
                if (!kind) diverged("bad edge kind");
                auto id = st.graph->add_edge(p.at("src").get<NodeId>(), p.at("dst").get<NodeId>(),
                                             *kind, e.ts, p.at("confidence").get<double>());
                if (id != p.at("edge_id").get<EdgeId>()) diverged("edge id");
                break;
            }
            case EventKind::chunk_added: {
                Chunk c;
                c.doc_name = p.at("doc_name").get<std::string>();
                c.ordinal = p.at("ordinal").get<std::size_t>();
                c.text = p.at("text").get<std::string>();
                c.embedding.values = p.at("embedding").get<std::vector<double>>();
                c.concept_keys = p.at("concept_keys").get<std::set<std::string>>();
                c.created_at = p.at("created_at").get<Timestamp>();
                auto id = st.index->add_chunk(std::move(c));
                if (id != p.at("chunk_id").get<ChunkId>()) diverged("chunk id");
                break;
            }
            case EventKind::doc_removed: {
                auto n = st.index->remove_doc(p.at("doc_name").get<std::string>());
                if (n != p.at("removed").get<std::size_t>()) diverged("removed chunk count");
                break;
            }
            case EventKind::nodes_pruned: {
                auto removed = st.graph->prune(p.at("max_nodes").get<std::size_t>(),
                                               p.at("now").get<Timestamp>());
                if (removed != p.at("removed").get<std::vector<NodeId>>()) diverged("pruned ids");
                break;
            }
            case EventKind::turn_recorded: {
                st.sessions[p.at("session_id").get<std::string>()].push_back(
                    {p.at("speaker").get<std::string>(), p.at("text").get<std::string>(), e.ts,
                     p.at("turn_node_id").get<NodeId>()});
                st.session_created.try_emplace(p.at("session_id").get<std::string>(), e.ts);
                break;
            }
            case EventKind::session_created: {
                auto id = p.at("session_id").get<std::string>();
                st.sessions[id];
                st.session_created.try_emplace(id, e.ts);
                break;
            }
            case EventKind::answer_generated:
            case EventKind::reflection_step:
            case EventKind::fallback_extract:
            case EventKind::llm_error:
                break;
            }
        } catch (const CorruptLog&) {
            throw;
        } catch (const std::exception& ex) {
            throw CorruptLog(e.seq, std::string("cannot apply event: ") + ex.what());
        }
    }
    st.last_seq = expected - 1;
    return st;
}

nlohmann::json canonical_snapshot(const MemoryGraph& graph, const VectorIndex& index) {
    return {{"graph", graph.snapshot()}, {"index", index.snapshot()}};
}

std::string state_hash(const MemoryGraph& graph, const VectorIndex& index) {
    return sha256_hex(canonical_snapshot(graph, index).dump());
}

VerifyResult verify_log_text(std::string_view text, const GraphConfig& graph_config,
                             std::size_t dimension) {
    VerifyResult r;
    LogContents contents;
    try {
        contents = parse_log(text);
    } catch (const CorruptLog& e) {
        return {VerifyStatus::corrupt, e.what(), {}};
    }
    if (!contents.footer) return {VerifyStatus::no_footer, "log has no footer", {}};
    if (contents.footer->last_seq != contents.events.size()) {
        return {VerifyStatus::corrupt, "footer last_seq does not match the log", {}};
    }
    if (contents.body_sha256 != contents.footer->log_sha256) {
        return {VerifyStatus::log_digest_mismatch, "log body digest mismatch", {}};
    }
    try {
        auto st = replay(contents.events, graph_config, dimension);
        r.state_hash = state_hash(*st.graph, *st.index);
    } catch (const CorruptLog& e) {
        return {VerifyStatus::corrupt, e.what(), {}};
    }
    if (r.state_hash != contents.footer->state_hash) {
        r.status = VerifyStatus::state_hash_mismatch;
        r.message = "state hash mismatch";
        return r;
    }
    r.message = "ok";
    return r;
}

} // namespace mnemos
