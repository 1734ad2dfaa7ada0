#include "mnemos/llm_gateway.hpp"

#include "mnemos/http_util.hpp"
#include "mnemos/text.hpp"

#include <fstream>
#include <sstream>
#include <thread>

namespace mnemos {

namespace {

const char* const kRoleNames[] = {"extractor", "answerer", "critic"};
const char* const kMessageRoleNames[] = {"system", "user", "assistant"};

std::string strip_fences(std::string_view s) {
    std::string out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto nl = s.find('\n', pos);
        auto line = s.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (text::trim(line).rfind("```", 0) != 0) {
            out.append(line);
            out.push_back('\n');
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

// End index (inclusive) of the balanced object starting at `open`, if any.
std::optional<std::size_t> balanced_end(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::nullopt;
}

} // namespace

std::string to_string(LlmRole role) { return kRoleNames[static_cast<int>(role)]; }

std::optional<LlmRole> llm_role_from_string(std::string_view s) {
    auto lower = text::to_lower(s);
    for (int i = 0; i < 3; ++i) {
        if (lower == kRoleNames[i]) return static_cast<LlmRole>(i);
    }
    return std::nullopt;
}

std::string to_string(ChatMessage::Role role) { return kMessageRoleNames[static_cast<int>(role)]; }

nlohmann::json to_wire(const ChatRequest& req) {
    auto messages = nlohmann::json::array();
    for (const auto& m : req.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    return {{"model", req.model},
            {"messages", std::move(messages)},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens}};
}

// ── HttpChatBackend ─────────────────────────────────────────────────

HttpChatBackend::HttpChatBackend(std::string id, std::string endpoint, std::string bearer_token)
    : id_(std::move(id)), endpoint_(std::move(endpoint)), bearer_token_(std::move(bearer_token)) {
    while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
}

std::string HttpChatBackend::chat(LlmRole, const ChatRequest& req) {
    auto res = http::post_json(endpoint_ + "/chat", to_wire(req).dump(), req.timeout, bearer_token_);
    if (res.status < 200 || res.status >= 300) throw HttpStatusError(res.status, res.body);
    try {
        auto body = nlohmann::json::parse(res.body);
        return body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw HttpStatusError(res.status, std::string("unreadable chat response: ") + e.what());
    }
}

// ── ScriptedBackend ─────────────────────────────────────────────────

ScriptedBackend::ScriptedBackend(std::string id) : id_(std::move(id)) {}

ScriptedBackend::Step ScriptedBackend::parse_line(const nlohmann::json& line) {
    if (!line.is_object()) throw InvalidArgument("script line must be a JSON object");
    Step step;
    auto role = llm_role_from_string(line.value("role", std::string{}));
    if (!role) throw InvalidArgument("script line has unknown role: " + line.dump());
    step.role = *role;
    step.is_default = line.value("default", false);
    if (line.contains("respond")) {
        if (!line["respond"].is_string()) throw InvalidArgument("script 'respond' must be a string");
        step.respond = line["respond"].get<std::string>();
    }
    step.fail = line.value("fail", std::string{});
    step.status = line.value("status", 500);
    if (!step.respond && step.fail.empty()) {
        throw InvalidArgument("script line needs 'respond' or 'fail': " + line.dump());
    }
    if (!step.fail.empty() && step.fail != "transport" && step.fail != "timeout" &&
        step.fail != "status") {
        throw InvalidArgument("unknown script failure kind: " + step.fail);
    }
    return step;
}

void ScriptedBackend::push(Step step) {
    std::lock_guard lock(mutex_);
    if (step.is_default) {
        defaults_[step.role] = std::move(step);
    } else {
        queues_[step.role].push_back(std::move(step));
    }
}

void ScriptedBackend::push_line(const nlohmann::json& line) { push(parse_line(line)); }

void ScriptedBackend::load_jsonl(std::string_view jsonl) {
    std::istringstream in{std::string(jsonl)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = text::trim(line);
        if (t.empty() || t[0] == '#') continue;
        try {
            push_line(nlohmann::json::parse(t));
        } catch (const std::exception& e) {
            throw InvalidArgument("mock script line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void ScriptedBackend::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open mock script " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    load_jsonl(ss.str());
}

std::size_t ScriptedBackend::pending(LlmRole role) const {
    std::lock_guard lock(mutex_);
    auto it = queues_.find(role);
    return it == queues_.end() ? 0 : it->second.size();
}

std::vector<std::pair<LlmRole, ChatRequest>> ScriptedBackend::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

std::string ScriptedBackend::chat(LlmRole role, const ChatRequest& req) {
    Step step;
    {
        std::lock_guard lock(mutex_);
        requests_.emplace_back(role, req);
        auto& q = queues_[role];
        if (!q.empty()) {
            step = std::move(q.front());
            q.pop_front();
        } else if (auto d = defaults_.find(role); d != defaults_.end()) {
            step = d->second;
        } else {
            throw TransportError("mock script exhausted for role " + to_string(role));
        }
    }
    if (step.fail == "transport") throw TransportError("scripted transport failure");
    if (step.fail == "timeout") throw TimeoutError("scripted timeout");
    if (step.fail == "status") throw HttpStatusError(step.status, "scripted status failure");
    return *step.respond;
}

// ── LlmGateway ──────────────────────────────────────────────────────

LlmGateway::LlmGateway(std::map<LlmRole, RoleBinding> roles,
                       std::map<std::string, std::shared_ptr<LlmBackend>> backends,
                       RetryPolicy policy, Sleeper sleeper)
    : roles_(std::move(roles)),
      backends_(std::move(backends)),
      policy_(policy),
      sleeper_(std::move(sleeper)) {
    for (auto role : {LlmRole::Extractor, LlmRole::Answerer, LlmRole::Critic}) {
        auto it = roles_.find(role);
        if (it == roles_.end()) throw InvalidArgument("role not configured: " + to_string(role));
        if (!backends_.contains(it->second.backend_id)) {
            throw InvalidArgument("role " + to_string(role) + " bound to unknown backend " +
                                  it->second.backend_id);
        }
    }
    if (!sleeper_) {
        sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

std::shared_ptr<LlmGateway> LlmGateway::single(std::shared_ptr<LlmBackend> backend,
                                               RetryPolicy policy, Sleeper sleeper) {
    auto id = backend->id();
    std::map<LlmRole, RoleBinding> roles;
    for (auto role : {LlmRole::Extractor, LlmRole::Answerer, LlmRole::Critic}) {
        roles[role] = RoleBinding{id, "scripted", 0.0, 1024};
    }
    return std::make_shared<LlmGateway>(std::move(roles),
                                        std::map<std::string, std::shared_ptr<LlmBackend>>{
                                            {id, std::move(backend)}},
                                        policy, std::move(sleeper));
}

void LlmGateway::set_error_sink(ErrorSink sink) {
    std::lock_guard lock(sink_mutex_);
    sink_ = std::move(sink);
}

void LlmGateway::report(const LlmErrorReport& r) {
    std::lock_guard lock(sink_mutex_);
    if (sink_) sink_(r);
}

Completion LlmGateway::complete(LlmRole role, const std::vector<ChatMessage>& messages,
                                const CompletionParams& params) {
    const auto& binding = roles_.at(role);
    auto& backend = *backends_.at(binding.backend_id);

    ChatRequest req;
    req.model = binding.model;
    req.messages = messages;
    req.temperature = params.temperature.value_or(binding.temperature);
    req.max_tokens = params.max_tokens.value_or(binding.max_tokens);
    req.timeout = policy_.timeout;

    const int attempts = policy_.max_retries + 1;
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        auto started = std::chrono::steady_clock::now();
        try {
            auto text = backend.chat(role, req);
            auto elapsed = std::chrono::steady_clock::now() - started;
            return {std::move(text),
                    std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count(),
                    binding.backend_id};
        } catch (const TimeoutError& e) {
            last_error = e.what();
            report({role, binding.backend_id, "timeout", e.what(), attempt, params.session_id, params.ts});
        } catch (const TransportError& e) {
            last_error = e.what();
            report({role, binding.backend_id, "transport", e.what(), attempt, params.session_id, params.ts});
        } catch (const HttpStatusError& e) {
            report({role, binding.backend_id, "http_status", e.what(), attempt, params.session_id, params.ts});
            throw;
        }
        if (attempt < attempts) sleeper_(policy_.backoff_base * (1 << (attempt - 1)));
    }
    report({role, binding.backend_id, "transport_exhausted", last_error, attempts, params.session_id, params.ts});
    throw TransportExhausted(last_error, attempts);
}

// ── JSON payload extraction ─────────────────────────────────────────

nlohmann::json parse_json_payload(std::string_view completion_text) {
    auto s = strip_fences(completion_text);
    for (auto open = s.find('{'); open != std::string::npos; open = s.find('{', open + 1)) {
        auto end = balanced_end(s, open);
        if (!end) continue;
        try {
            return nlohmann::json::parse(s.substr(open, *end - open + 1));
        } catch (const nlohmann::json::parse_error& e) {
            throw MalformedJson(std::string("malformed JSON object: ") + e.what());
        }
    }
    throw NoJsonObject("no JSON object found in completion");
}

} // namespace mnemos
