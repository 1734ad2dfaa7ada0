#pragma once

#include "mnemos/engine.hpp"

#include <json.hpp>

#include <atomic>
#include <functional>
#include <map>
#include <string>

namespace mnemos {

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
    std::string authorization; // raw Authorization header
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body = nlohmann::json::object();
    std::map<std::string, std::string> headers;
};

// {"error": {"kind", "message"}}
ApiResponse error_response(int status, const std::string& kind, const std::string& message);

nlohmann::json node_json(const ConceptNode& n);
nlohmann::json edge_json(const RelationEdge& e);
nlohmann::json subgraph_json(const Subgraph& g);
nlohmann::json event_json(const Event& e);

/// Maps HTTP requests onto engine calls. Transport-free so it can be driven
/// directly from tests; run_server() puts it behind a socket.
class ApiRouter {
public:
    explicit ApiRouter(Engine& engine);

    ApiResponse handle(const ApiRequest& req);

private:
    ApiResponse dispatch(const ApiRequest& req);
    ApiResponse create_session(const ApiRequest& req);
    ApiResponse get_messages(const std::string& id);
    ApiResponse post_message(const std::string& id, const ApiRequest& req);
    ApiResponse graph_nodes(const ApiRequest& req);
    ApiResponse node_neighborhood(const std::string& id, const ApiRequest& req);
    ApiResponse events(const ApiRequest& req);
    ApiResponse ingest(const ApiRequest& req);

    Engine& engine_;
};

/// Serves the router on host:port until stop is requested. `on_ready` runs
/// once the socket is bound, with the actual port.
class ApiServer {
public:
    ApiServer(Engine& engine, std::string host, int port);
    ~ApiServer();

    // Blocks. Returns false when the socket cannot be bound.
    bool run(const std::function<void(int port)>& on_ready = {});
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace mnemos
