#include "helpers.hpp"

#include "mnemos/config.hpp"
#include "mnemos/engine.hpp"

#include <doctest.h>

#include <fstream>
#include <regex>

using namespace mnemos;
using nlohmann::json;

namespace {

constexpr Timestamp kT0 = 1704699000000;

EngineOptions fixed_options(std::shared_ptr<ScriptedBackend> mock, Timestamp* clock) {
    EngineOptions o;
    o.mock = std::move(mock);
    o.sleeper = [](std::chrono::milliseconds) {};
    o.clock = [clock] { return *clock; };
    return o;
}

std::shared_ptr<ScriptedBackend> friendly_mock() {
    auto m = std::make_shared<ScriptedBackend>();
    m->push_line({{"role", "extractor"}, {"default", true}, {"respond", testing::kEmptyExtraction}});
    m->push_line({{"role", "answerer"}, {"default", true}, {"respond", "noted"}});
    m->push_line({{"role", "critic"}, {"default", true}, {"respond", R"({"score":0.9,"missing":[]})"}});
    return m;
}

} // namespace

TEST_CASE("defaults") {
    auto c = config_from_json(json::object());
    CHECK(c.listen_addr == "127.0.0.1:8080");
    CHECK(c.roles.size() == 3);
    CHECK(c.roles[LlmRole::Critic].backend == "mock");
    CHECK(c.graph.semantic_weight == 0.6);
    CHECK(c.orchestrator.reflection.threshold == 0.8);
    CHECK(c.orchestrator.reflection.max_iterations == 3);
    CHECK(c.chunking.size == 512);
    CHECK(c.chunking.overlap == 64);
    CHECK(c.retry.max_retries == 2);
    CHECK(c.retry.backoff_base == std::chrono::milliseconds(250));
    CHECK_FALSE(c.event_log);
}

TEST_CASE("a full config document") {
    json doc = {{"listen_addr", "0.0.0.0:9000"},
                {"roles", {{"answerer", {{"backend", "http"}, {"endpoint", "http://llm:1"}, {"model", "big"}}}}},
                {"mock_script", "script.jsonl"},
                {"weights", {{"semantic", 0.5}, {"recency", 0.3}, {"proximity", 0.2}, {"tau_ms", 1000}}},
                {"reflection", {{"threshold", 0.7}, {"max_iterations", 5}}},
                {"prune", {{"max_nodes", 100}}},
                {"chunking", {{"size", 256}, {"overlap", 32}}},
                {"retry", {{"max_retries", 1}, {"backoff_ms", 10}, {"timeout_ms", 500}}},
                {"event_log", "/abs/events.jsonl"},
                {"bearer_token", "t"},
                {"cors_origin", "*"}};
    auto c = config_from_json(doc, "/etc/mnemos");
    CHECK(c.roles[LlmRole::Answerer].backend == "http");
    CHECK(c.roles[LlmRole::Answerer].model == "big");
    CHECK(c.roles[LlmRole::Extractor].backend == "mock");
    CHECK(*c.mock_script == std::filesystem::path("/etc/mnemos/script.jsonl"));
    CHECK(*c.event_log == std::filesystem::path("/abs/events.jsonl"));
    CHECK(c.graph.recency_tau_ms == 1000);
    CHECK(c.orchestrator.reflection.max_iterations == 5);
    CHECK(c.orchestrator.prune_max_nodes == 100);
    CHECK(c.chunking.size == 256);
    CHECK(c.retry.timeout == std::chrono::milliseconds(500));
    CHECK(split_listen_addr(c.listen_addr) == std::pair<std::string, int>{"0.0.0.0", 9000});
}

TEST_CASE("bad configs are rejected") {
    std::vector<json> bad = {
        {{"colour", "red"}},
        {{"roles", {{"poet", json::object()}}}},
        {{"roles", {{"critic", {{"backend", "carrier-pigeon"}}}}}},
        {{"roles", {{"critic", {{"backend", "http"}}}}}},
        {{"weights", {{"semantic", -0.1}}}},
        {{"weights", {{"tau_ms", 0}}}},
        {{"reflection", {{"threshold", 1.5}}}},
        {{"reflection", {{"max_iterations", 0}}}},
        {{"chunking", {{"size", 10}, {"overlap", 10}}}},
        {{"retry", {{"max_retries", -1}}}},
        {{"listen_addr", "nohost"}},
        {{"listen_addr", "h:99999"}},
        {{"embedder", {{"provider", "remote"}}}},
        {{"weights", {{"semantic", "high"}}}},
    };
    for (const auto& doc : bad) {
        CAPTURE(doc.dump());
        CHECK_THROWS_AS(config_from_json(doc), InvalidArgument);
    }
}

TEST_CASE("load_config resolves relative paths against the file") {
    testing::TempDir dir("cfg");
    {
        std::ofstream out(dir / "mnemos.json");
        out << R"({"event_log":"events.jsonl"})";
    }
    auto c = load_config(dir / "mnemos.json");
    CHECK(*c.event_log == dir / "events.jsonl");
    CHECK_THROWS(load_config(dir / "missing.json"));
}

TEST_CASE("session ids are uuid v4 and distinct") {
    std::regex v4("[0-9a-f]{8}-[0-9a-f]{4}-4[0-9a-f]{3}-[89ab][0-9a-f]{3}-[0-9a-f]{12}");
    std::set<std::string> seen;
    for (int i = 0; i < 100; ++i) {
        auto id = random_uuid();
        CHECK(std::regex_match(id, v4));
        seen.insert(id);
    }
    CHECK(seen.size() == 100);
}

TEST_CASE("engine sessions and messages") {
    Timestamp clock = kT0;
    auto mock = friendly_mock();
    mock->push_line({{"role", "extractor"},
                     {"respond", R"({"entities":[{"label":"Garmin Forerunner","kind":"Entity"}],"relations":[]})"}});
    Engine engine(EngineConfig{}, fixed_options(mock, &clock));
    auto a = engine.create_session();
    auto b = engine.create_session();
    CHECK(a.session_id != b.session_id);
    CHECK(a.created_at == kT0);
    CHECK(engine.sessions().size() == 2);

    clock += 1000;
    auto trace = engine.send_message(a.session_id, "I switched to a Garmin Forerunner.");
    CHECK(trace.bundle.answer == "noted");
    auto msgs = engine.messages(a.session_id);
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0].speaker == "user");
    CHECK(msgs[0].ts == kT0 + 1000);
    CHECK(engine.session(a.session_id)->turn_count == 2);

    CHECK_THROWS_AS(engine.messages("nope"), NotFound);
    CHECK_THROWS_AS(engine.send_message("nope", "hi"), NotFound);
    CHECK(engine.open_session(a.session_id).created_at == kT0);

    auto hits = engine.query_nodes("Garmin Forerunner", std::nullopt, 3);
    REQUIRE_FALSE(hits.empty());
    CHECK(engine.graph().node(hits[0].id)->label == "Garmin Forerunner");
}

TEST_CASE("llm failures become llm_error events") {
    Timestamp clock = kT0;
    auto mock = std::make_shared<ScriptedBackend>();
    mock->push_line({{"role", "extractor"}, {"fail", "transport"}});
    mock->push_line({{"role", "extractor"}, {"default", true}, {"respond", testing::kEmptyExtraction}});
    Engine engine(EngineConfig{}, fixed_options(mock, &clock));
    auto s = engine.create_session();
    engine.record_turn(s.session_id, "hello", Speaker::user);
    std::vector<Event> errors;
    for (const auto& e : engine.events_since(0))
        if (e.kind == EventKind::llm_error) errors.push_back(e);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].payload["role"] == "extractor");
    CHECK(errors[0].payload["kind"] == "transport");
    CHECK(errors[0].payload["session_id"] == s.session_id);
    CHECK(errors[0].payload["attempt"] == 1);
}

TEST_CASE("an engine restarted on its log recovers state and sessions") {
    testing::TempDir dir("engine");
    EngineConfig cfg;
    cfg.event_log = dir / "events.jsonl";
    Timestamp clock = kT0;
    std::string hash, sid, empty_sid;
    {
        Engine engine(cfg, fixed_options(friendly_mock(), &clock));
        sid = engine.create_session().session_id;
        empty_sid = engine.create_session().session_id;
        engine.send_message(sid, "We hiked the Dolomites.");
        clock += kMillisPerDay;
        engine.ingest("notes.txt", "The Canadian Rockies are next.");
        engine.send_message(sid, "Any other mountains?");
        engine.seal();
        hash = engine.state_hash();
    }
    clock += kMillisPerDay;
    Engine again(cfg, fixed_options(friendly_mock(), &clock));
    CHECK(again.state_hash() == hash);
    REQUIRE(again.session(sid));
    CHECK(again.session(sid)->created_at == kT0);
    CHECK(again.messages(sid).size() == 4);
    REQUIRE(again.session(empty_sid));
    CHECK(again.messages(empty_sid).empty());
    auto before = again.log().last_seq();
    again.send_message(sid, "And the Alps?");
    CHECK(again.log().last_seq() > before);
    CHECK(again.messages(sid).size() == 6);
}
