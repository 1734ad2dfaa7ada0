#include "helpers.hpp"
#include "oracles.hpp"

#include "mnemos/embedder.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <random>
#include <thread>

using namespace mnemos;

TEST_CASE("empty and whitespace text embed to the zero vector") {
    HashingEmbedder e;
    CHECK(e.embed("").is_zero());
    CHECK(e.embed("   \t\n").is_zero());
    CHECK(e.embed("!!! ...").is_zero());
    CHECK(e.embed("").dimension() == 64);
}

TEST_CASE("normalization rules make surface variants identical") {
    HashingEmbedder e;
    CHECK(e.embed("Dolomites") == e.embed("  dolomites!"));
}

TEST_CASE("FNV-1a 64 known values") {
    // Published test vectors for 64-bit FNV-1a.
    CHECK(HashingEmbedder::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(HashingEmbedder::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(HashingEmbedder::fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("embedder matches the independent oracle bit for bit") {
    HashingEmbedder e;
    std::vector<std::string> texts = {
        "hiking in the Dolomites", "tax law", "Toyota Highlander Hybrid", "a", "ab", "abc",
        "I’m looking for a new car again.", "crème brûlée 42", "WHOOP Strap", "x1 y2 z3 x1",
    };
    for (const auto& t : texts) {
        CAPTURE(t);
        CHECK(e.embed(t).values == oracle::embed(t));
    }

    std::mt19937_64 rng(7);
    const std::string alphabet = "abcdefghij KLMNOP 0123,.;!é€";
    for (int i = 0; i < 300; ++i) {
        std::string t;
        auto len = rng() % 40;
        for (std::size_t k = 0; k < len; ++k) {
            auto cps = oracle::decode_utf8(alphabet);
            t += oracle::encode_utf8({cps[rng() % cps.size()]});
        }
        CAPTURE(t);
        CHECK(e.embed(t).values == oracle::embed(t));
    }
}

TEST_CASE("cosine between embeddings") {
    HashingEmbedder e;
    auto a = e.embed("hiking in the Dolomites");
    CHECK(cosine(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    auto b = e.embed("tax law");
    CHECK(cosine(a, b) == doctest::Approx(oracle::cosine(oracle::embed("hiking in the Dolomites"),
                                                         oracle::embed("tax law")))
                              .epsilon(1e-12));
}

TEST_CASE("outputs are unit length and deterministic") {
    HashingEmbedder e;
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        std::string t = "word" + std::to_string(rng() % 1000) + " other " + std::to_string(rng());
        auto v = e.embed(t);
        CHECK(std::abs(v.norm() - 1.0) < 1e-9);
        CHECK(e.embed(t) == v);
    }
    HashingEmbedder e128(128);
    CHECK(e128.embed("abc").dimension() == 128);
    CHECK_THROWS_AS(HashingEmbedder(0), InvalidArgument);
}

namespace {

// Serves POST /embed with a fixed status and body.
struct FakeEmbedServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    FakeEmbedServer(int status, std::string body) {
        server.Post("/embed", [status, body](const httplib::Request& req, httplib::Response& res) {
            auto in = nlohmann::json::parse(req.body);
            res.status = status;
            res.set_content(in.contains("input") ? body : "{}", "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeEmbedServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/embed"; }
};

std::string vector_body(std::vector<double> v) { return nlohmann::json{{"embedding", v}}.dump(); }

} // namespace

TEST_CASE("remote embedder re-normalizes the returned vector") {
    std::vector<double> raw(64, 0.0);
    raw[0] = 3;
    raw[1] = 4;
    FakeEmbedServer srv(200, vector_body(raw));
    RemoteEmbedder e(srv.url(), 64);
    auto v = e.embed("anything");
    CHECK(v.values[0] == doctest::Approx(0.6));
    CHECK(v.values[1] == doctest::Approx(0.8));
    CHECK(v.values[2] == 0.0);
}

TEST_CASE("remote embedder error kinds") {
    SUBCASE("non-2xx status") {
        FakeEmbedServer srv(500, "{\"error\":\"boom\"}");
        RemoteEmbedder e(srv.url(), 64);
        CHECK_THROWS_AS(e.embed("x"), HttpStatusError);
    }
    SUBCASE("wrong dimension") {
        FakeEmbedServer srv(200, vector_body(std::vector<double>(32, 1.0)));
        RemoteEmbedder e(srv.url(), 64);
        CHECK_THROWS_AS(e.embed("x"), DimensionMismatch);
    }
    SUBCASE("nothing listening") {
        int port;
        {
            httplib::Server probe;
            port = probe.bind_to_any_port("127.0.0.1");
        }
        RemoteEmbedder e("http://127.0.0.1:" + std::to_string(port) + "/embed", 64,
                         std::chrono::milliseconds(500));
        CHECK_THROWS_AS(e.embed("x"), TransportError);
    }
}
