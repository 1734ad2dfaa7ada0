// mnemos command line: chat, ingest, eval, replay, serve.

#include "mnemos/config.hpp"
#include "mnemos/engine.hpp"
#include "mnemos/eval.hpp"
#include "mnemos/persistence.hpp"
#include "mnemos/service_api.hpp"
#include "mnemos/text.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

using namespace mnemos;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::string config_path;
    std::string server_url;
    std::string format = "text";
    std::string log_path;
    std::string mock_script;

    bool json_out() const { return format == "json"; }
};

EngineConfig resolve_config(const Globals& g) {
    EngineConfig cfg = g.config_path.empty() ? EngineConfig{} : load_config(g.config_path);
    if (!g.log_path.empty()) cfg.event_log = g.log_path;
    if (!g.mock_script.empty()) cfg.mock_script = g.mock_script;
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string fmt_score(double s) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << s;
    return out.str();
}

// ── remote engine over HTTP ─────────────────────────────────────────

class RemoteClient {
public:
    explicit RemoteClient(const std::string& url) : client_(url) {
        client_.set_read_timeout(std::chrono::seconds(300));
        if (const char* tok = std::getenv("MNEMOS_API_TOKEN")) client_.set_bearer_token_auth(tok);
    }

    json call(const std::string& method, const std::string& path, const json& body = nullptr) {
        httplib::Result res = method == "GET"
                                  ? client_.Get(path)
                                  : client_.Post(path, body.is_null() ? "" : body.dump(), "application/json");
        if (!res) throw TransportError("cannot reach server: " + httplib::to_string(res.error()));
        json parsed = res->body.empty() ? json::object() : json::parse(res->body, nullptr, false);
        if (res->status >= 300) {
            std::string msg = parsed.is_object() && parsed.contains("error")
                                  ? parsed["error"].value("message", res->body)
                                  : res->body;
            throw HttpStatusError(res->status, msg);
        }
        return parsed;
    }

private:
    httplib::Client client_;
};

// ── chat ────────────────────────────────────────────────────────────

struct ChatOptions {
    std::string session;
    std::optional<Timestamp> at;
};

// A line "@<ms> text" pins the clock to <ms> for that line and the ones after.
std::optional<Timestamp> take_timestamp(std::string& line) {
    if (line.empty() || line[0] != '@') return std::nullopt;
    auto space = line.find(' ');
    auto num = line.substr(1, space == std::string::npos ? std::string::npos : space - 1);
    try {
        std::size_t used = 0;
        auto ts = std::stoll(num, &used);
        if (used != num.size() || ts <= 0) throw std::invalid_argument(num);
        line = space == std::string::npos ? "" : line.substr(space + 1);
        return ts;
    } catch (const std::exception&) {
        throw UsageError("bad timestamp prefix: @" + num);
    }
}

int run_chat(const Globals& g, const ChatOptions& opts) {
    std::unique_ptr<Engine> engine;
    std::unique_ptr<RemoteClient> remote;
    std::string session = opts.session;
    if (g.server_url.empty()) {
        engine = std::make_unique<Engine>(resolve_config(g));
        engine->open_session(session, opts.at);
    } else {
        remote = std::make_unique<RemoteClient>(g.server_url);
        try {
            remote->call("GET", "/v1/sessions/" + session + "/messages");
        } catch (const HttpStatusError& e) {
            if (e.status != 404) throw;
            json body = json::object();
            if (opts.at) body["ts"] = *opts.at;
            session = remote->call("POST", "/v1/sessions", body).at("session_id").get<std::string>();
            std::cerr << "created session " << session << "\n";
        }
    }

    std::optional<Timestamp> pinned = opts.at;
    json turns = json::array();
    int status = kExitOk;
    std::string line;
    while (std::getline(std::cin, line)) {
        if (auto ts = take_timestamp(line)) pinned = ts;
        auto text = std::string(text::trim(line));
        if (text.empty()) continue;
        json bundle;
        try {
            if (engine) {
                bundle = to_json(engine->send_message(session, text, pinned).bundle);
            } else {
                json body = {{"text", text}};
                if (pinned) body["ts"] = *pinned;
                bundle = remote->call("POST", "/v1/sessions/" + session + "/messages", body);
            }
        } catch (const LlmExhausted& e) {
            std::cerr << "error: " << e.what() << "\n";
            status = kExitFailed;
            continue;
        } catch (const HttpStatusError& e) {
            if (e.status != 502) throw;
            std::cerr << "error: " << e.what() << "\n";
            status = kExitFailed;
            continue;
        }
        if (g.json_out()) {
            turns.push_back({{"query", text}, {"response", bundle}});
        } else {
            std::cout << "> " << text << "\n"
                      << bundle.at("answer").get<std::string>() << "\n"
                      << "  (iterations " << bundle.at("iterations_used").get<int>() << ", score "
                      << fmt_score(bundle.at("final_score").get<double>()) << ")\n";
        }
    }
    if (g.json_out()) std::cout << json{{"session_id", session}, {"turns", turns}}.dump(2) << "\n";
    if (engine && engine->config().event_log) engine->seal();
    return status;
}

// ── ingest ──────────────────────────────────────────────────────────

int run_ingest(const Globals& g, const std::vector<std::string>& paths, std::optional<Timestamp> at) {
    std::vector<std::pair<std::string, std::string>> docs;
    for (const auto& p : paths) docs.emplace_back(std::filesystem::path(p).filename().string(), read_file(p));

    json reports = json::array();
    auto emit = [&](const json& r) {
        if (g.json_out()) {
            reports.push_back(r);
            return;
        }
        std::cout << r.at("doc_name").get<std::string>() << ": " << r.at("chunk_count") << " chunks, "
                  << r.at("concept_keys_attached").size() << " concept keys, " << r.at("elapsed_ms")
                  << " ms\n";
    };

    if (g.server_url.empty()) {
        Engine engine(resolve_config(g));
        for (const auto& [name, body] : docs) emit(to_json(engine.ingest(name, body, at)));
        if (engine.config().event_log) engine.seal();
    } else {
        RemoteClient remote(g.server_url);
        for (const auto& [name, body] : docs) {
            json req = {{"name", name}, {"text", body}};
            if (at) req["ts"] = *at;
            emit(remote.call("POST", "/v1/ingest", req));
        }
    }
    if (g.json_out()) std::cout << json{{"ingested", reports}}.dump(2) << "\n";
    return kExitOk;
}

// ── eval ────────────────────────────────────────────────────────────

int run_eval(const Globals& g, const std::string& scenarios_path, double min_accuracy) {
    if (!g.server_url.empty()) throw UsageError("eval runs in-process only");
    if (!std::filesystem::exists(scenarios_path)) throw UsageError("no such file: " + scenarios_path);
    auto scenarios = load_scenarios(scenarios_path);
    auto cfg = resolve_config(g);
    cfg.event_log.reset();
    auto report = run_scenarios(scenarios, cfg);
    if (g.json_out()) {
        std::cout << to_json(report).dump(2) << "\n";
    } else {
        std::cout << format_report(report);
    }
    return report.accuracy + 1e-12 < min_accuracy ? kExitFailed : kExitOk;
}

// ── replay ──────────────────────────────────────────────────────────

int run_replay(const Globals& g, const std::string& log_path, bool verify) {
    if (!std::filesystem::exists(log_path)) throw UsageError("no such file: " + log_path);
    auto cfg = resolve_config(g);
    auto bytes = read_file(log_path);
    std::size_t dim = cfg.embedder.dimension;

    if (verify) {
        auto r = verify_log_text(bytes, cfg.graph, dim);
        static const char* names[] = {"ok", "no_footer", "log_digest_mismatch", "state_hash_mismatch",
                                      "corrupt"};
        auto status = names[static_cast<int>(r.status)];
        if (g.json_out()) {
            std::cout << json{{"verified", r.status == VerifyStatus::ok},
                              {"status", status},
                              {"message", r.message},
                              {"state_hash", r.state_hash}}
                             .dump(2)
                      << "\n";
        } else if (r.status == VerifyStatus::ok) {
            std::cout << "verified: state_hash " << r.state_hash << "\n";
        } else {
            std::cout << "verification failed (" << status << "): " << r.message << "\n";
        }
        return r.status == VerifyStatus::ok ? kExitOk : kExitFailed;
    }

    LogContents contents;
    ReplayedState st;
    try {
        contents = parse_log(bytes);
        st = replay(contents.events, cfg.graph, dim);
    } catch (const CorruptLog& e) {
        if (g.json_out()) {
            std::cout << json{{"error", {{"kind", "corrupt_log"}, {"message", e.what()}}}}.dump(2) << "\n";
        } else {
            std::cout << "corrupt log: " << e.what() << "\n";
        }
        return kExitFailed;
    }
    auto hash = state_hash(*st.graph, *st.index);
    if (g.json_out()) {
        std::cout << json{{"events", contents.events.size()},
                          {"nodes", st.graph->node_count()},
                          {"edges", st.graph->edge_count()},
                          {"chunks", st.index->size()},
                          {"sessions", st.sessions.size()},
                          {"state_hash", hash}}
                         .dump(2)
                  << "\n";
    } else {
        std::cout << contents.events.size() << " events, " << st.graph->node_count() << " nodes, "
                  << st.graph->edge_count() << " edges, " << st.index->size() << " chunks, "
                  << st.sessions.size() << " sessions\nstate_hash " << hash << "\n";
    }
    return kExitOk;
}

// ── serve ───────────────────────────────────────────────────────────

int run_serve(const Globals& g, const std::string& listen) {
    auto cfg = resolve_config(g);
    if (!listen.empty()) cfg.listen_addr = listen;
    auto [host, port] = split_listen_addr(cfg.listen_addr);

    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    Engine engine(cfg);
    ApiServer server(engine, host, port);
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    });
    bool ok = server.run([&, h = host](int bound) {
        std::cerr << "listening on " << h << ":" << bound << std::endl;
    });
    if (!ok) {
        std::cerr << "error: cannot listen on " << cfg.listen_addr << "\n";
        pthread_kill(waiter.native_handle(), SIGTERM);
    }
    waiter.join();
    if (engine.config().event_log) engine.seal();
    return ok ? kExitOk : kExitFailed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mnemos: conversational assistant with temporal graph memory"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "Engine config file (JSON)")->check(CLI::ExistingFile);
    app.add_option("--server", g.server_url, "Talk to a running server instead of an in-process engine");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"text", "json"}));
    app.add_option("--log", g.log_path, "Event log file (overrides the config)");
    app.add_option("--mock-script", g.mock_script, "Scripted LLM responses, JSONL (overrides the config)");

    ChatOptions chat_opts;
    Timestamp at_raw = 0;
    auto* chat = app.add_subcommand("chat", "Chat on stdin, one message per line");
    chat->add_option("--session", chat_opts.session, "Session id; created on first use")->required();
    chat->add_option("--at", at_raw, "Pin message timestamps (ms since epoch)")->check(CLI::PositiveNumber);

    std::vector<std::string> ingest_paths;
    auto* ingest = app.add_subcommand("ingest", "Add documents to the vector index");
    ingest->add_option("paths", ingest_paths, "Text files")->required();
    ingest->add_option("--at", at_raw, "Ingestion timestamp (ms since epoch)")->check(CLI::PositiveNumber);

    std::string scenarios_path;
    double min_accuracy = 0.0;
    auto* eval = app.add_subcommand("eval", "Run scenario fixtures and print metrics");
    eval->add_option("--scenarios", scenarios_path, "Scenario file (JSON)")->required();
    eval->add_option("--min-accuracy", min_accuracy, "Exit 1 when accuracy falls below this")
        ->check(CLI::Range(0.0, 1.0));

    std::string log_arg;
    bool verify = false;
    auto* replay_cmd = app.add_subcommand("replay", "Rebuild state from an event log");
    replay_cmd->add_option("log", log_arg, "Event log (JSONL)")->required();
    replay_cmd->add_flag("--verify", verify, "Check the footer digests");

    std::string listen;
    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    serve->add_option("--listen", listen, "host:port (overrides listen_addr)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    std::optional<Timestamp> at;
    if (at_raw > 0) at = at_raw;
    chat_opts.at = at;

    try {
        if (*chat) return run_chat(g, chat_opts);
        if (*ingest) return run_ingest(g, ingest_paths, at);
        if (*eval) return run_eval(g, scenarios_path, min_accuracy);
        if (*replay_cmd) return run_replay(g, log_arg, verify);
        if (*serve) return run_serve(g, listen);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailed;
    }
    return kExitUsage;
}
