#include "mnemos/service_api.hpp"

#include "mnemos/text.hpp"

#include <httplib.h>

#include <charconv>
#include <optional>

namespace mnemos {

namespace {

using nlohmann::json;

constexpr std::size_t kDefaultNodeLimit = 20;
constexpr std::size_t kMaxNodeLimit = 1000;
constexpr int kMaxHops = 8;

struct BadRequest : Error {
    using Error::Error;
};

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos < path.size()) {
        auto slash = path.find('/', pos);
        if (slash == std::string::npos) slash = path.size();
        if (slash > pos) parts.push_back(path.substr(pos, slash - pos));
        pos = slash + 1;
    }
    return parts;
}

template <typename T>
std::optional<T> parse_int(const std::string& s) {
    T v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

template <typename T>
std::optional<T> int_param(const ApiRequest& req, const std::string& name) {
    auto it = req.query.find(name);
    if (it == req.query.end()) return std::nullopt;
    auto v = parse_int<T>(it->second);
    if (!v) throw BadRequest("query parameter '" + name + "' must be an integer");
    return v;
}

json parse_body(const ApiRequest& req) {
    json body;
    try {
        body = json::parse(req.body);
    } catch (const json::parse_error&) {
        throw BadRequest("request body is not valid JSON");
    }
    if (!body.is_object()) throw BadRequest("request body must be a JSON object");
    return body;
}

std::optional<Timestamp> ts_field(const json& body) {
    if (!body.contains("ts") || body["ts"].is_null()) return std::nullopt;
    if (!body["ts"].is_number_integer()) throw BadRequest("'ts' must be an integer (ms since epoch)");
    auto ts = body["ts"].get<Timestamp>();
    if (ts <= 0) throw BadRequest("'ts' must be positive");
    return ts;
}

std::string string_field(const json& body, const char* key) {
    if (!body.contains(key)) return {};
    if (!body[key].is_string()) throw BadRequest(std::string("'") + key + "' must be a string");
    return body[key].get<std::string>();
}

json turn_json(const TurnRecord& t) {
    return {{"speaker", t.speaker}, {"text", t.text}, {"ts", t.ts}, {"node_id", t.node_id}};
}

} // namespace

ApiResponse error_response(int status, const std::string& kind, const std::string& message) {
    return {status, {{"error", {{"kind", kind}, {"message", message}}}}, {}};
}

json node_json(const ConceptNode& n) {
    return {{"id", n.id},
            {"label", n.label},
            {"kind", to_string(n.kind)},
            {"created_at", n.created_at},
            {"last_seen", n.last_seen},
            {"mention_count", n.mention_count}};
}

json edge_json(const RelationEdge& e) {
    return {{"src", e.src},
            {"dst", e.dst},
            {"kind", to_string(e.kind)},
            {"created_at", e.created_at},
            {"last_seen", e.last_seen},
            {"confidence", e.confidence}};
}

json subgraph_json(const Subgraph& g) {
    json nodes = json::array();
    json edges = json::array();
    for (const auto& n : g.nodes) nodes.push_back(node_json(n));
    for (const auto& e : g.edges) edges.push_back(edge_json(e));
    return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

json event_json(const Event& e) { return to_json(e); }

ApiRouter::ApiRouter(Engine& engine) : engine_(engine) {}

ApiResponse ApiRouter::handle(const ApiRequest& req) {
    const auto& cfg = engine_.config();
    ApiResponse res;
    if (req.method == "OPTIONS") {
        res.status = 204;
        res.body = nullptr;
    } else if (!cfg.bearer_token.empty() && req.path != "/v1/health" &&
               req.authorization != "Bearer " + cfg.bearer_token) {
        res = error_response(401, "unauthorized", "missing or wrong bearer token");
    } else {
        try {
            res = dispatch(req);
        } catch (const BadRequest& e) {
            res = error_response(400, "bad_request", e.what());
        } catch (const NotFound& e) {
            res = error_response(404, "not_found", e.what());
        } catch (const LlmExhausted& e) {
            res = error_response(502, "llm_exhausted", e.what());
        } catch (const InvalidArgument& e) {
            res = error_response(422, "invalid_argument", e.what());
        } catch (const TransportError& e) {
            res = error_response(502, "upstream_unavailable", e.what());
        } catch (const HttpStatusError& e) {
            res = error_response(502, "upstream_error", e.what());
        } catch (const std::exception& e) {
            res = error_response(500, "internal", e.what());
        }
    }
    if (!cfg.cors_origin.empty()) {
        res.headers["Access-Control-Allow-Origin"] = cfg.cors_origin;
        res.headers["Access-Control-Allow-Headers"] = "Authorization, Content-Type";
        res.headers["Access-Control-Allow-Methods"] = "GET, POST, OPTIONS";
    }
    return res;
}

ApiResponse ApiRouter::dispatch(const ApiRequest& req) {
    auto parts = split_path(req.path);
    auto not_found = [&] { return error_response(404, "not_found", "no route for " + req.path); };
    auto wrong_method = [&] {
        return error_response(405, "method_not_allowed", req.method + " not allowed on " + req.path);
    };
    if (parts.size() < 2 || parts[0] != "v1") return not_found();
    const auto& m = req.method;

    if (parts.size() == 2 && parts[1] == "health") {
        if (m != "GET") return wrong_method();
        return {200, {{"status", "ok"}}, {}};
    }
    if (parts[1] == "sessions") {
        if (parts.size() == 2) return m == "POST" ? create_session(req) : wrong_method();
        if (parts.size() == 4 && parts[3] == "messages") {
            if (m == "GET") return get_messages(parts[2]);
            if (m == "POST") return post_message(parts[2], req);
            return wrong_method();
        }
        return not_found();
    }
    if (parts[1] == "graph" && parts.size() >= 3 && parts[2] == "nodes") {
        if (parts.size() == 3) return m == "GET" ? graph_nodes(req) : wrong_method();
        if (parts.size() == 5 && parts[4] == "neighborhood") {
            return m == "GET" ? node_neighborhood(parts[3], req) : wrong_method();
        }
        return not_found();
    }
    if (parts.size() == 2 && parts[1] == "events") return m == "GET" ? events(req) : wrong_method();
    if (parts.size() == 2 && parts[1] == "ingest") return m == "POST" ? ingest(req) : wrong_method();
    return not_found();
}

ApiResponse ApiRouter::create_session(const ApiRequest& req) {
    std::optional<Timestamp> ts;
    if (!text::trim(req.body).empty()) ts = ts_field(parse_body(req));
    auto s = engine_.create_session(ts);
    return {200, {{"session_id", s.session_id}}, {}};
}

ApiResponse ApiRouter::get_messages(const std::string& id) {
    json messages = json::array();
    for (const auto& t : engine_.messages(id)) messages.push_back(turn_json(t));
    return {200, {{"session_id", id}, {"messages", std::move(messages)}}, {}};
}

ApiResponse ApiRouter::post_message(const std::string& id, const ApiRequest& req) {
    if (!engine_.session(id)) throw NotFound("unknown session " + id);
    auto body = parse_body(req);
    auto text = string_field(body, "text");
    auto ts = ts_field(body);
    if (text::trim(text).empty()) return error_response(422, "empty_text", "message text must not be empty");
    return {200, to_json(engine_.send_message(id, text, ts).bundle), {}};
}

ApiResponse ApiRouter::graph_nodes(const ApiRequest& req) {
    std::string q;
    if (auto it = req.query.find("q"); it != req.query.end()) q = it->second;
    auto from = int_param<Timestamp>(req, "from");
    auto to = int_param<Timestamp>(req, "to");
    auto now = int_param<Timestamp>(req, "now");
    auto limit = int_param<long long>(req, "limit").value_or(kDefaultNodeLimit);
    if (limit < 1 || limit > static_cast<long long>(kMaxNodeLimit)) {
        throw BadRequest("'limit' must lie in [1, " + std::to_string(kMaxNodeLimit) + "]");
    }
    std::optional<TimeWindow> window;
    if (from || to) {
        window = TimeWindow{from.value_or(std::numeric_limits<Timestamp>::min()),
                            to.value_or(std::numeric_limits<Timestamp>::max())};
        if (window->from > window->to) throw BadRequest("'from' must not exceed 'to'");
    }
    if (now && *now <= 0) throw BadRequest("'now' must be positive");

    auto scored = engine_.query_nodes(q, window, static_cast<std::size_t>(limit), now);
    json nodes = json::array();
    std::set<NodeId> ids;
    for (const auto& s : scored) {
        auto n = engine_.graph().node(s.id);
        if (!n) continue;
        auto j = node_json(*n);
        j["score"] = s.score;
        j["semantic"] = s.semantic;
        j["recency"] = s.recency;
        j["proximity"] = s.proximity;
        nodes.push_back(std::move(j));
        ids.insert(s.id);
    }
    // Edges among the returned nodes, so a client can draw them directly.
    json edges = json::array();
    for (const auto& e : engine_.graph().edges()) {
        if (ids.contains(e.src) && ids.contains(e.dst)) edges.push_back(edge_json(e));
    }
    return {200, {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}}, {}};
}

ApiResponse ApiRouter::node_neighborhood(const std::string& id, const ApiRequest& req) {
    auto node_id = parse_int<NodeId>(id);
    if (!node_id) throw BadRequest("node id must be an unsigned integer");
    auto hops = int_param<int>(req, "hops").value_or(1);
    if (hops < 0 || hops > kMaxHops) throw BadRequest("'hops' must lie in [0, " + std::to_string(kMaxHops) + "]");
    if (!engine_.graph().node(*node_id)) throw NotFound("unknown node " + id);
    return {200, subgraph_json(engine_.neighborhood(*node_id, hops)), {}};
}

ApiResponse ApiRouter::events(const ApiRequest& req) {
    auto since = int_param<std::uint64_t>(req, "since_seq").value_or(0);
    json events = json::array();
    for (const auto& e : engine_.events_since(since)) events.push_back(event_json(e));
    return {200, {{"events", std::move(events)}, {"last_seq", engine_.log().last_seq()}}, {}};
}

ApiResponse ApiRouter::ingest(const ApiRequest& req) {
    auto body = parse_body(req);
    auto name = string_field(body, "name");
    auto text = string_field(body, "text");
    auto ts = ts_field(body);
    if (text::trim(name).empty()) return error_response(422, "invalid_argument", "'name' must not be empty");
    if (text.empty()) return error_response(422, "invalid_argument", "'text' must not be empty");
    return {200, to_json(engine_.ingest(name, text, ts)), {}};
}

// ── socket adapter ──────────────────────────────────────────────────

struct ApiServer::Impl {
    Impl(Engine& engine, std::string h, int p) : router(engine), host(std::move(h)), port(p) {}
    ApiRouter router;
    std::string host;
    int port;
    httplib::Server server;
};

ApiServer::ApiServer(Engine& engine, std::string host, int port)
    : impl_(std::make_unique<Impl>(engine, std::move(host), port)) {
    auto handler = [this](const httplib::Request& hreq, httplib::Response& hres) {
        ApiRequest req;
        req.method = hreq.method;
        req.path = hreq.path;
        for (const auto& [k, v] : hreq.params) req.query[k] = v;
        req.body = hreq.body;
        req.authorization = hreq.get_header_value("Authorization");
        auto res = impl_->router.handle(req);
        hres.status = res.status;
        for (const auto& [k, v] : res.headers) hres.set_header(k, v);
        if (!res.body.is_null()) hres.set_content(res.body.dump(), "application/json");
    };
    auto& s = impl_->server;
    s.Get(".*", handler);
    s.Post(".*", handler);
    s.Put(".*", handler);
    s.Delete(".*", handler);
    s.Options(".*", handler);
}

ApiServer::~ApiServer() = default;

bool ApiServer::run(const std::function<void(int)>& on_ready) {
    auto& s = impl_->server;
    int port = impl_->port;
    if (port == 0) {
        port = s.bind_to_any_port(impl_->host);
        if (port < 0) return false;
    } else if (!s.bind_to_port(impl_->host, port)) {
        return false;
    }
    if (on_ready) on_ready(port);
    return s.listen_after_bind();
}

void ApiServer::stop() { impl_->server.stop(); }

} // namespace mnemos
