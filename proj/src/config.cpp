#include "mnemos/config.hpp"

#include <fstream>
#include <set>

namespace mnemos {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw InvalidArgument(where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) throw InvalidArgument("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument(where + "." + key + " has the wrong type");
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

RoleConfig read_role(const json& j, const std::string& where) {
    reject_unknown(j, {"backend", "endpoint", "model", "temperature", "max_tokens"}, where);
    RoleConfig r;
    read(j, "backend", r.backend, where);
    read(j, "endpoint", r.endpoint, where);
    read(j, "model", r.model, where);
    read(j, "temperature", r.temperature, where);
    read(j, "max_tokens", r.max_tokens, where);
    if (r.backend != "mock" && r.backend != "http") {
        throw InvalidArgument(where + ".backend must be \"mock\" or \"http\"");
    }
    if (r.backend == "http" && r.endpoint.empty()) throw InvalidArgument(where + ".endpoint is required");
    if (r.max_tokens <= 0) throw InvalidArgument(where + ".max_tokens must be positive");
    return r;
}

} // namespace

EngineConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
    reject_unknown(doc,
                   {"listen_addr", "roles", "mock_script", "embedder", "weights", "reflection", "prune",
                    "chunking", "retry", "prompts_dir", "event_log", "bearer_token", "cors_origin"},
                   "config");
    EngineConfig c;
    read(doc, "listen_addr", c.listen_addr, "config");
    read(doc, "bearer_token", c.bearer_token, "config");
    read(doc, "cors_origin", c.cors_origin, "config");
    std::string path;
    if (doc.contains("mock_script")) {
        read(doc, "mock_script", path, "config");
        c.mock_script = resolve(base_dir, path);
    }
    if (doc.contains("prompts_dir")) {
        read(doc, "prompts_dir", path, "config");
        c.prompts_dir = resolve(base_dir, path);
    }
    if (doc.contains("event_log")) {
        read(doc, "event_log", path, "config");
        c.event_log = resolve(base_dir, path);
    }

    if (doc.contains("roles")) {
        const auto& roles = doc["roles"];
        reject_unknown(roles, {"extractor", "answerer", "critic"}, "roles");
        for (const auto& [name, value] : roles.items()) {
            c.roles[*llm_role_from_string(name)] = read_role(value, "roles." + name);
        }
    }

    if (doc.contains("embedder")) {
        const auto& e = doc["embedder"];
        reject_unknown(e, {"provider", "endpoint", "dimension"}, "embedder");
        read(e, "provider", c.embedder.provider, "embedder");
        read(e, "endpoint", c.embedder.endpoint, "embedder");
        read(e, "dimension", c.embedder.dimension, "embedder");
        if (c.embedder.provider != "deterministic" && c.embedder.provider != "remote") {
            throw InvalidArgument("embedder.provider must be \"deterministic\" or \"remote\"");
        }
        if (c.embedder.provider == "remote" && c.embedder.endpoint.empty()) {
            throw InvalidArgument("embedder.endpoint is required for the remote provider");
        }
        if (c.embedder.dimension == 0) throw InvalidArgument("embedder.dimension must be positive");
    }

    if (doc.contains("weights")) {
        const auto& w = doc["weights"];
        reject_unknown(w, {"semantic", "recency", "proximity", "tau_ms", "merge_threshold", "max_hops"},
                       "weights");
        auto& g = c.graph;
        read(w, "semantic", g.semantic_weight, "weights");
        read(w, "recency", g.recency_weight, "weights");
        read(w, "proximity", g.proximity_weight, "weights");
        read(w, "tau_ms", g.recency_tau_ms, "weights");
        read(w, "merge_threshold", g.merge_threshold, "weights");
        read(w, "max_hops", g.max_proximity_hops, "weights");
        if (g.semantic_weight < 0 || g.recency_weight < 0 || g.proximity_weight < 0) {
            throw InvalidArgument("weights must be non-negative");
        }
        if (g.recency_tau_ms <= 0) throw InvalidArgument("weights.tau_ms must be positive");
        if (g.merge_threshold < -1 || g.merge_threshold > 1) {
            throw InvalidArgument("weights.merge_threshold must lie in [-1, 1]");
        }
        if (g.max_proximity_hops < 0) throw InvalidArgument("weights.max_hops must be >= 0");
    }

    if (doc.contains("reflection")) {
        const auto& r = doc["reflection"];
        reject_unknown(r, {"threshold", "max_iterations"}, "reflection");
        auto& refl = c.orchestrator.reflection;
        read(r, "threshold", refl.threshold, "reflection");
        read(r, "max_iterations", refl.max_iterations, "reflection");
        if (refl.threshold < 0 || refl.threshold > 1) {
            throw InvalidArgument("reflection.threshold must lie in [0, 1]");
        }
        if (refl.max_iterations < 1 || refl.max_iterations > 16) {
            throw InvalidArgument("reflection.max_iterations must lie in [1, 16]");
        }
    }

    if (doc.contains("prune")) {
        reject_unknown(doc["prune"], {"max_nodes"}, "prune");
        read(doc["prune"], "max_nodes", c.orchestrator.prune_max_nodes, "prune");
    }

    if (doc.contains("chunking")) {
        reject_unknown(doc["chunking"], {"size", "overlap"}, "chunking");
        read(doc["chunking"], "size", c.chunking.size, "chunking");
        read(doc["chunking"], "overlap", c.chunking.overlap, "chunking");
        if (c.chunking.size <= c.chunking.overlap) {
            throw InvalidArgument("chunking.size must exceed chunking.overlap");
        }
    }

    if (doc.contains("retry")) {
        const auto& r = doc["retry"];
        reject_unknown(r, {"max_retries", "backoff_ms", "timeout_ms"}, "retry");
        int retries = c.retry.max_retries;
        long long backoff = c.retry.backoff_base.count();
        long long timeout = c.retry.timeout.count();
        read(r, "max_retries", retries, "retry");
        read(r, "backoff_ms", backoff, "retry");
        read(r, "timeout_ms", timeout, "retry");
        if (retries < 0 || backoff < 0 || timeout <= 0) throw InvalidArgument("retry values out of range");
        c.retry.max_retries = retries;
        c.retry.backoff_base = std::chrono::milliseconds(backoff);
        c.retry.timeout = std::chrono::milliseconds(timeout);
    }

    split_listen_addr(c.listen_addr);
    return c;
}

EngineConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::parse_error& e) {
        throw InvalidArgument("config " + path.string() + ": " + e.what());
    }
    return config_from_json(doc, path.parent_path());
}

std::pair<std::string, int> split_listen_addr(const std::string& addr) {
    auto colon = addr.rfind(':');
    if (colon == std::string::npos || colon == 0) {
        throw InvalidArgument("listen_addr must look like host:port");
    }
    int port = 0;
    try {
        std::size_t used = 0;
        port = std::stoi(addr.substr(colon + 1), &used);
        if (used != addr.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw InvalidArgument("listen_addr has a bad port: " + addr);
    }
    if (port < 0 || port > 65535) throw InvalidArgument("listen_addr port out of range");
    return {addr.substr(0, colon), port};
}

} // namespace mnemos
