#pragma once

#include "mnemos/ingestion.hpp"
#include "mnemos/llm_gateway.hpp"
#include "mnemos/memory_graph.hpp"
#include "mnemos/orchestrator.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace mnemos {

struct RoleConfig {
    std::string backend = "mock"; // "mock" or "http"
    std::string endpoint;
    std::string model = "default";
    double temperature = 0.2;
    int max_tokens = 1024;
};

struct EmbedderConfig {
    std::string provider = "deterministic"; // or "remote"
    std::string endpoint;
    std::size_t dimension = 64;
};

struct EngineConfig {
    std::string listen_addr = "127.0.0.1:8080";
    std::map<LlmRole, RoleConfig> roles = {
        {LlmRole::Extractor, {}}, {LlmRole::Answerer, {}}, {LlmRole::Critic, {}}};
    std::optional<std::filesystem::path> mock_script;
    EmbedderConfig embedder;
    GraphConfig graph;
    OrchestratorConfig orchestrator;
    ChunkingConfig chunking;
    RetryPolicy retry;
    std::optional<std::filesystem::path> prompts_dir;
    std::optional<std::filesystem::path> event_log;
    std::string bearer_token;
    std::string cors_origin;
};

// Relative paths in the document are resolved against `base_dir`. Unknown
// keys and out-of-range values throw InvalidArgument.
EngineConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
EngineConfig load_config(const std::filesystem::path& path);

// host and port from "host:port"
std::pair<std::string, int> split_listen_addr(const std::string& addr);

} // namespace mnemos
