#pragma once

#include "mnemos/types.hpp"

#include <json.hpp>

#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mnemos {

enum class LlmRole { Extractor, Answerer, Critic };

std::string to_string(LlmRole role);
std::optional<LlmRole> llm_role_from_string(std::string_view s);

struct ChatMessage {
    enum class Role { system, user, assistant };
    Role role = Role::user;
    std::string content;
};

std::string to_string(ChatMessage::Role role);

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::chrono::milliseconds timeout{30000};
};

// Wire body: {"model", "messages":[{"role","content"}], "temperature", "max_tokens"}.
nlohmann::json to_wire(const ChatRequest& req);

struct Completion {
    std::string text;
    std::int64_t latency_ms = 0;
    std::string backend_id;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string id() const = 0;
    // Returns the assistant text. Throws TransportError, TimeoutError or
    // HttpStatusError. The role is informational for real backends.
    virtual std::string chat(LlmRole role, const ChatRequest& req) = 0;
};

/// Chat-completions style HTTP backend: POST {endpoint}/chat, reads
/// choices[0].message.content.
class HttpChatBackend final : public LlmBackend {
public:
    HttpChatBackend(std::string id, std::string endpoint, std::string bearer_token = {});
    std::string id() const override { return id_; }
    std::string chat(LlmRole role, const ChatRequest& req) override;

private:
    std::string id_;
    std::string endpoint_;
    std::string bearer_token_;
};

/// Plays back a script, one queue per role.
///
/// Script lines (JSONL):
///   {"role":"critic","respond":"{\"score\":0.5}"}
///   {"role":"answerer","fail":"transport"}        also "timeout"
///   {"role":"answerer","fail":"status","status":503}
///   {"role":"extractor","default":true,"respond":"..."}
/// A `default` line is never consumed; it answers whenever the role's queue
/// is empty. Without one, an empty queue is a transport failure.
class ScriptedBackend final : public LlmBackend {
public:
    struct Step {
        LlmRole role = LlmRole::Answerer;
        std::optional<std::string> respond;
        std::string fail; // "", "transport", "timeout", "status"
        int status = 500;
        bool is_default = false;
    };

    explicit ScriptedBackend(std::string id = "mock");

    static Step parse_line(const nlohmann::json& line);

    void push(Step step);
    void push_line(const nlohmann::json& line);
    // Loads a JSONL script; blank lines and lines starting with '#' are skipped.
    void load_jsonl(std::string_view jsonl);
    void load_file(const std::string& path);

    std::size_t pending(LlmRole role) const;
    // Every request seen, in call order.
    std::vector<std::pair<LlmRole, ChatRequest>> requests() const;

    std::string id() const override { return id_; }
    std::string chat(LlmRole role, const ChatRequest& req) override;

private:
    std::string id_;
    mutable std::mutex mutex_;
    std::map<LlmRole, std::deque<Step>> queues_;
    std::map<LlmRole, Step> defaults_;
    std::vector<std::pair<LlmRole, ChatRequest>> requests_;
};

struct RoleBinding {
    std::string backend_id;
    std::string model;
    double temperature = 0.2;
    int max_tokens = 1024;
};

struct RetryPolicy {
    int max_retries = 2;
    std::chrono::milliseconds backoff_base{250};
    std::chrono::milliseconds timeout{30000};
};

struct CompletionParams {
    std::optional<double> temperature;
    std::optional<int> max_tokens;
    // Carried into error reports so they can be logged against the caller's
    // session and clock.
    std::string session_id;
    Timestamp ts = 0;
};

struct LlmErrorReport {
    LlmRole role = LlmRole::Answerer;
    std::string backend_id;
    std::string kind; // transport | timeout | http_status | transport_exhausted
    std::string message;
    int attempt = 0;
    std::string session_id;
    Timestamp ts = 0;
};

/// Routes each role to its backend with retry on transport failures.
/// Safe for concurrent calls as long as the backends are.
class LlmGateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;
    using ErrorSink = std::function<void(const LlmErrorReport&)>;

    LlmGateway(std::map<LlmRole, RoleBinding> roles,
               std::map<std::string, std::shared_ptr<LlmBackend>> backends, RetryPolicy policy = {},
               Sleeper sleeper = {});

    // Single-backend convenience: all three roles bound to `backend`.
    static std::shared_ptr<LlmGateway> single(std::shared_ptr<LlmBackend> backend,
                                              RetryPolicy policy = {}, Sleeper sleeper = {});

    Completion complete(LlmRole role, const std::vector<ChatMessage>& messages,
                        const CompletionParams& params = {});

    void set_error_sink(ErrorSink sink);

private:
    void report(const LlmErrorReport& r);

    std::map<LlmRole, RoleBinding> roles_;
    std::map<std::string, std::shared_ptr<LlmBackend>> backends_;
    RetryPolicy policy_;
    Sleeper sleeper_;
    std::mutex sink_mutex_;
    ErrorSink sink_;
};

/// Pulls the first balanced {...} object out of LLM output, after stripping
/// ``` fences. Throws NoJsonObject or MalformedJson (both UnusableOutput).
nlohmann::json parse_json_payload(std::string_view completion_text);

} // namespace mnemos
