#include "helpers.hpp"
#include "oracles.hpp"

#include "mnemos/memory_graph.hpp"
#include "mnemos/text.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <thread>

using namespace mnemos;
using testing::axis;
using testing::random_unit;

TEST_CASE("upsert merges on canonical key") {
    MemoryGraph g;
    auto e = axis(0);
    auto a = g.upsert_node("Dolomites", NodeKind::Entity, e, 100, "s1");
    auto b = g.upsert_node("Dolomites", NodeKind::Entity, e, 100, "s1");
    CHECK(a == b);
    CHECK(g.node(a)->mention_count == 2);

    auto c = g.upsert_node("dolomites ", NodeKind::Entity, axis(5), 200, "s2");
    CHECK(c == a);
    auto n = *g.node(a);
    CHECK(n.last_seen == 200);
    CHECK(n.created_at == 100);
    CHECK(n.label == "Dolomites");
    CHECK(n.session_ids == std::set<std::string>{"s1", "s2"});
}

TEST_CASE("same label with a different kind is a different node") {
    MemoryGraph g;
    auto a = g.upsert_node("hybrid", NodeKind::Topic, axis(0), 10, "s");
    auto b = g.upsert_node("hybrid", NodeKind::Preference, axis(0), 10, "s");
    CHECK(a != b);
    CHECK(g.node_count() == 2);
}

TEST_CASE("labels whose embeddings clear the merge threshold collapse into one node") {
    HashingEmbedder emb;
    const std::string first = "WHOOP Strap", second = "Whoop strap band";
    double c = oracle::cosine(oracle::embed(first), oracle::embed(second));
    REQUIRE(c >= 0.92);
    REQUIRE(c < 1.0);
    CHECK(c == doctest::Approx(0.960769).epsilon(1e-6));

    MemoryGraph g;
    auto a = g.upsert_node(first, NodeKind::Entity, emb.embed(first), 100, "s");
    auto b = g.upsert_node(second, NodeKind::Entity, emb.embed(second), 150, "s");
    CHECK(a == b);
    CHECK(g.node(a)->label == first);
    CHECK(g.node(a)->mention_count == 2);

    // below the threshold: separate nodes
    REQUIRE(oracle::cosine(oracle::embed("Canadian Rockies"), oracle::embed("Rockies")) < 0.92);
    auto r1 = g.upsert_node("Canadian Rockies", NodeKind::Entity, emb.embed("Canadian Rockies"), 100, "s");
    auto r2 = g.upsert_node("Rockies", NodeKind::Entity, emb.embed("Rockies"), 100, "s");
    CHECK(r1 != r2);
}

TEST_CASE("similarity merge picks the earliest-created candidate") {
    MemoryGraph g;
    auto base = axis(0);
    EmbeddingVector near1{base.values}, near2{base.values};
    near1.values[1] = 0.3;
    near2.values[2] = 0.3;
    normalize(near1);
    normalize(near2);
    auto late = g.upsert_node("late", NodeKind::Topic, near1, 500, "s");
    auto early = g.upsert_node("early", NodeKind::Topic, near2, 100, "s");
    REQUIRE(late != early); // cos(near1, near2) < 0.92
    auto merged = g.upsert_node("probe", NodeKind::Topic, base, 600, "s");
    CHECK(merged == early);
}

TEST_CASE("upsert validation") {
    MemoryGraph g;
    CHECK_THROWS_AS(g.upsert_node("x", NodeKind::Entity, axis(0), 0, "s"), InvalidArgument);
    CHECK_THROWS_AS(g.upsert_node("x", NodeKind::Entity, axis(0), -5, "s"), InvalidArgument);
    CHECK_THROWS_AS(g.upsert_node("   ", NodeKind::Entity, axis(0), 1, "s"), InvalidArgument);
    CHECK_THROWS_AS(g.upsert_node("x", NodeKind::Entity, EmbeddingVector{std::vector<double>(64, 1.0)}, 1, "s"),
                    InvalidArgument);
    g.upsert_node("x", NodeKind::Entity, axis(0), 1, "s");
    CHECK_THROWS_AS(g.upsert_node("y", NodeKind::Entity, axis(0, 8), 1, "s"), DimensionMismatch);
    // zero vector is allowed
    CHECK_NOTHROW(g.upsert_node("z", NodeKind::Entity, EmbeddingVector{std::vector<double>(64, 0.0)}, 1, "s"));
}

TEST_CASE("edge dedup and validation") {
    MemoryGraph g;
    auto a = g.upsert_node("a", NodeKind::Entity, axis(0), 1, "s");
    auto b = g.upsert_node("b", NodeKind::Entity, axis(1), 1, "s");

    auto e1 = g.add_edge(a, b, EdgeKind::RELATES_TO, 10, 0.8);
    auto e2 = g.add_edge(a, b, EdgeKind::RELATES_TO, 20, 0.6);
    CHECK(e1 == e2);
    REQUIRE(g.edge_count() == 1);
    auto e = g.edges().front();
    CHECK(e.last_seen == 20);
    CHECK(e.created_at == 10);
    CHECK(e.confidence == 0.8);

    CHECK_THROWS_AS(g.add_edge(a, a, EdgeKind::RELATES_TO, 10, 0.5), InvalidArgument);
    CHECK_THROWS_AS(g.add_edge(a, 999, EdgeKind::RELATES_TO, 10, 0.5), NotFound);
    CHECK_THROWS_AS(g.add_edge(a, b, EdgeKind::RELATES_TO, 10, 1.5), InvalidArgument);

    g.add_edge(a, b, EdgeKind::MENTIONS, 10, 1.0);
    CHECK(g.edge_count() == 2);
    // direction matters for the key
    g.add_edge(b, a, EdgeKind::MENTIONS, 10, 1.0);
    CHECK(g.edge_count() == 3);
}

TEST_CASE("query_nodes window filter") {
    MemoryGraph g;
    g.upsert_node("t100", NodeKind::Entity, axis(0), 100, "s");
    auto mid = g.upsert_node("t200", NodeKind::Entity, axis(1), 200, "s");
    g.upsert_node("t300", NodeKind::Entity, axis(2), 300, "s");
    NodeQuery q{axis(3), 300, 10, TimeWindow{150, 250}, {}};
    auto res = g.query_nodes(q);
    REQUIRE(res.size() == 1);
    CHECK(res[0].id == mid);

    q.window = TimeWindow{200, 300}; // bounds are inclusive
    CHECK(g.query_nodes(q).size() == 2);
}

TEST_CASE("query_nodes maximal components give score 1") {
    MemoryGraph g;
    auto e = axis(4);
    auto id = g.upsert_node("self", NodeKind::Topic, e, 1000, "s");
    auto res = g.query_nodes({e, 1000, 1, std::nullopt, {id}});
    REQUIRE(res.size() == 1);
    CHECK(res[0].semantic == doctest::Approx(1.0));
    CHECK(res[0].recency == 1.0);
    CHECK(res[0].proximity == 1.0);
    CHECK(res[0].score == doctest::Approx(1.0));
}

TEST_CASE("query_nodes rejects k = 0 and tolerates clock skew") {
    MemoryGraph g;
    g.upsert_node("future", NodeKind::Entity, axis(0), 5000, "s");
    CHECK_THROWS_AS(g.query_nodes({axis(0), 100, 0, std::nullopt, {}}), InvalidArgument);
    auto res = g.query_nodes({axis(0), 100, 1, std::nullopt, {}});
    CHECK(res[0].recency == 1.0);
}

TEST_CASE("query_nodes equals the brute-force oracle on 20 random nodes without seeds") {
    std::mt19937_64 rng(20);
    MemoryGraph g;
    for (int i = 0; i < 20; ++i) {
        g.upsert_node("n" + std::to_string(i), NodeKind::Entity, random_unit(rng), 1 + rng() % 100000000, "s");
    }
    NodeQuery q{random_unit(rng), 100000000, 20, std::nullopt, {}};
    auto got = g.query_nodes(q);
    auto want = oracle::query_nodes(g.nodes(), g.edges(), q);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].id == want[i].id);
        CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-12));
    }
}

TEST_CASE("recency decays strictly with age and is 1 at age 0") {
    MemoryGraph g;
    double prev = 2.0;
    for (Timestamp age : std::initializer_list<Timestamp>{0, 1, 1000, kMillisPerDay, 30 * kMillisPerDay, 365 * kMillisPerDay}) {
        double r = g.recency(1'000'000'000'000 - age, 1'000'000'000'000);
        CHECK(r < prev);
        if (age == 0) CHECK(r == 1.0);
        CHECK(r == doctest::Approx(std::exp(-double(age) / (30.0 * kMillisPerDay))).epsilon(1e-15));
        prev = r;
    }
}

TEST_CASE("proximity uses hops from the nearest seed up to the cap") {
    MemoryGraph g;
    std::vector<NodeId> chain;
    for (int i = 0; i < 6; ++i) {
        chain.push_back(g.upsert_node("c" + std::to_string(i), NodeKind::Entity, axis(i), 10, "s"));
        if (i > 0) g.add_edge(chain[i - 1], chain[i], EdgeKind::RELATES_TO, 10, 1.0);
    }
    auto res = g.query_nodes({axis(10), 10, 6, std::nullopt, {chain[0]}});
    std::map<NodeId, double> prox;
    for (const auto& s : res) prox[s.id] = s.proximity;
    CHECK(prox[chain[0]] == 1.0);
    CHECK(prox[chain[1]] == 0.5);
    CHECK(prox[chain[3]] == doctest::Approx(0.25));
    CHECK(prox[chain[4]] == 0.0); // 4 hops, beyond the cap of 3
}

TEST_CASE("neighborhood") {
    MemoryGraph g;
    auto a = g.upsert_node("a", NodeKind::Entity, axis(0), 1, "s");
    auto b = g.upsert_node("b", NodeKind::Entity, axis(1), 1, "s");
    auto c = g.upsert_node("c", NodeKind::Entity, axis(2), 1, "s");
    g.add_edge(a, b, EdgeKind::RELATES_TO, 1, 1.0);
    g.add_edge(b, c, EdgeKind::RELATES_TO, 1, 1.0);

    auto h0 = g.neighborhood({a, b}, 0);
    CHECK(h0.nodes.size() == 2);
    CHECK(h0.edges.size() == 1);

    auto h1 = g.neighborhood({a}, 1);
    REQUIRE(h1.nodes.size() == 2);
    CHECK(h1.nodes[0].id == a);
    CHECK(h1.nodes[1].id == b);
    REQUIRE(h1.edges.size() == 1);
    CHECK(h1.edges[0].src == a);

    CHECK_THROWS_AS(g.neighborhood({42}, 1), NotFound);
    CHECK_THROWS_AS(g.neighborhood({a}, -1), InvalidArgument);
}

TEST_CASE("neighborhood equals brute-force BFS on random graphs") {
    std::mt19937_64 rng(30);
    for (int round = 0; round < 20; ++round) {
        MemoryGraph g;
        std::vector<NodeId> ids;
        for (int i = 0; i < 30; ++i) {
            ids.push_back(g.upsert_node("v" + std::to_string(i), NodeKind::Entity, random_unit(rng), 1, "s"));
        }
        for (int k = 0; k < 35; ++k) {
            auto x = ids[rng() % ids.size()], y = ids[rng() % ids.size()];
            if (x != y) g.add_edge(x, y, EdgeKind::RELATES_TO, 1, 0.5);
        }
        std::vector<NodeId> start{ids[rng() % ids.size()], ids[rng() % ids.size()]};
        auto sub = g.neighborhood(start, 2);
        auto want = oracle::bfs(g.edges(), start, 2);
        std::set<NodeId> got;
        for (const auto& n : sub.nodes) got.insert(n.id);
        CHECK(got == want);
        std::size_t inner = 0;
        for (const auto& e : g.edges()) inner += want.count(e.src) && want.count(e.dst);
        CHECK(sub.edges.size() == inner);
    }
}

TEST_CASE("prune") {
    SUBCASE("at the bound nothing is removed") {
        MemoryGraph g;
        for (int i = 0; i < 10; ++i) g.upsert_node("n" + std::to_string(i), NodeKind::Entity, axis(i), 100 + i, "s");
        CHECK(g.prune(10).empty());
        CHECK(g.node_count() == 10);
    }
    SUBCASE("12 nodes down to 10 removes the two lowest ranked") {
        MemoryGraph g;
        std::mt19937_64 rng(12);
        std::vector<NodeId> ids;
        for (int i = 0; i < 12; ++i) {
            Timestamp ts = 1 + static_cast<Timestamp>(rng() % (90 * kMillisPerDay));
            ids.push_back(g.upsert_node("n" + std::to_string(i), NodeKind::Entity, random_unit(rng), ts, "s"));
            if (rng() % 3 == 0) g.upsert_node("n" + std::to_string(i), NodeKind::Entity, random_unit(rng), ts, "s");
        }
        for (int k = 0; k < 15; ++k) {
            auto x = ids[rng() % 12], y = ids[rng() % 12];
            if (x != y) g.add_edge(x, y, EdgeKind::RELATES_TO, 1, 0.5);
        }
        // oracle ranking: recency at the newest last_seen, times mention_count
        Timestamp now = 0;
        for (const auto& n : g.nodes()) now = std::max(now, n.last_seen);
        std::vector<std::pair<double, NodeId>> ranked;
        for (const auto& n : g.nodes()) {
            ranked.push_back({std::exp(-double(now - n.last_seen) / (30.0 * kMillisPerDay)) * n.mention_count, n.id});
        }
        std::sort(ranked.begin(), ranked.end());
        auto removed = g.prune(10);
        CHECK(removed.size() == 2);
        std::set<NodeId> want{ranked[0].second, ranked[1].second};
        CHECK(std::set<NodeId>(removed.begin(), removed.end()) == want);
        for (const auto& e : g.edges()) {
            CHECK(g.node(e.src));
            CHECK(g.node(e.dst));
        }
    }
}

TEST_CASE("random operation sequences keep the store invariants") {
    std::mt19937_64 rng(99);
    MemoryGraph g;
    std::vector<std::string> labels;
    for (int i = 0; i < 25; ++i) labels.push_back("Label " + std::to_string(i));
    HashingEmbedder emb;
    for (int step = 0; step < 600; ++step) {
        auto op = rng() % 10;
        if (op < 6) {
            const auto& l = labels[rng() % labels.size()];
            auto kind = static_cast<NodeKind>(rng() % 4);
            auto before = g.node_count();
            auto existing = g.find(l, kind);
            auto prior = existing ? g.node(*existing)->mention_count : 0u;
            auto id = g.upsert_node(rng() % 2 ? l : "  " + text::to_lower(l) + " ", kind, emb.embed(l),
                                    1 + static_cast<Timestamp>(rng() % 1000000), "s" + std::to_string(rng() % 3));
            if (existing) {
                CHECK(id == *existing);
                CHECK(g.node_count() == before);
                CHECK(g.node(id)->mention_count == prior + 1);
            }
        } else if (op < 9 && g.node_count() >= 2) {
            auto nodes = g.nodes();
            auto a = nodes[rng() % nodes.size()].id, b = nodes[rng() % nodes.size()].id;
            if (a != b) g.add_edge(a, b, static_cast<EdgeKind>(rng() % 5), 1 + rng() % 1000, (rng() % 101) / 100.0);
        } else if (g.node_count() > 5) {
            g.prune(g.node_count() - 2);
        }

        std::set<std::pair<std::string, NodeKind>> keys;
        for (const auto& n : g.nodes()) {
            CHECK(keys.insert({n.canonical_key, n.kind}).second);
            CHECK(n.last_seen >= n.created_at);
            CHECK(n.mention_count >= 1);
        }
        for (const auto& e : g.edges()) {
            CHECK(e.src != e.dst);
            CHECK(g.node(e.src));
            CHECK(g.node(e.dst));
        }
    }
}

TEST_CASE("snapshot is canonical across insertion orders") {
    auto build = [](bool reversed) {
        auto g = std::make_unique<MemoryGraph>();
        std::vector<std::pair<std::string, std::size_t>> items = {{"a", 0}, {"b", 1}, {"c", 2}};
        if (reversed) std::reverse(items.begin(), items.end());
        for (const auto& [l, i] : items) g->upsert_node(l, NodeKind::Entity, axis(i), 5, "s");
        auto a = *g->find("a", NodeKind::Entity), b = *g->find("b", NodeKind::Entity),
             c = *g->find("c", NodeKind::Entity);
        if (reversed) {
            g->add_edge(b, c, EdgeKind::ABOUT, 5, 0.5);
            g->add_edge(a, b, EdgeKind::ABOUT, 5, 0.5);
        } else {
            g->add_edge(a, b, EdgeKind::ABOUT, 5, 0.5);
            g->add_edge(b, c, EdgeKind::ABOUT, 5, 0.5);
        }
        return g;
    };
    auto s1 = build(false)->snapshot(), s2 = build(true)->snapshot();
    // ids differ with insertion order, labels and structure do not
    CHECK(s1["nodes"].size() == 3);
    CHECK(s1["edges"].size() == 2);
    auto labels = [](const nlohmann::json& s) {
        std::vector<std::string> out;
        for (const auto& n : s["nodes"]) out.push_back(n["label"]);
        return out;
    };
    CHECK(labels(s1) == std::vector<std::string>{"a", "b", "c"});
    CHECK(labels(s2) == std::vector<std::string>{"c", "b", "a"});
    CHECK(s1.dump().find(' ') == std::string::npos);
}

TEST_CASE("concurrent readers and a writer") {
    MemoryGraph g;
    std::mt19937_64 seed_rng(5);
    for (int i = 0; i < 50; ++i) g.upsert_node("base" + std::to_string(i), NodeKind::Entity, random_unit(seed_rng), 10, "s");
    std::atomic<bool> done{false};
    std::thread writer([&] {
        std::mt19937_64 rng(6);
        for (int i = 0; i < 300; ++i) {
            auto a = g.upsert_node("w" + std::to_string(i), NodeKind::Topic, random_unit(rng), 20 + i, "s");
            g.add_edge(a, 1, EdgeKind::ABOUT, 20 + i, 0.5);
        }
        done = true;
    });
    std::mt19937_64 rng(7);
    int reads = 0;
    while (!done) {
        auto res = g.query_nodes({random_unit(rng), 1000, 10, std::nullopt, {1}});
        CHECK(res.size() == 10);
        ++reads;
    }
    writer.join();
    CHECK(g.node_count() == 350);
    CHECK(reads > 0);
}
