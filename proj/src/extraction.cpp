#include "mnemos/extraction.hpp"

#include "mnemos/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace mnemos {

namespace {

constexpr std::array<std::string_view, 20> kStopwords = {
    "i",  "the", "a",  "an",  "in", "on",  "at",   "and",  "or",  "to",
    "of", "we",  "you", "it", "my", "our", "this", "that", "can", "back"};

// Multi-byte punctuation that shows up around words in chat text.
constexpr std::array<std::string_view, 7> kUnicodePunct = {
    "’", "‘", "“", "”", "—", "–", "…"};

bool is_stopword(std::string_view w) {
    return std::find(kStopwords.begin(), kStopwords.end(), w) != kStopwords.end();
}

std::size_t punct_prefix(std::string_view s) {
    if (s.empty()) return 0;
    auto c = static_cast<unsigned char>(s[0]);
    if (c < 0x80) return std::isalnum(c) ? 0 : 1;
    for (auto p : kUnicodePunct) {
        if (s.substr(0, p.size()) == p) return p.size();
    }
    return 0;
}

std::size_t punct_suffix(std::string_view s) {
    if (s.empty()) return 0;
    auto c = static_cast<unsigned char>(s.back());
    if (c < 0x80) return std::isalnum(c) ? 0 : 1;
    for (auto p : kUnicodePunct) {
        if (s.size() >= p.size() && s.substr(s.size() - p.size()) == p) return p.size();
    }
    return 0;
}

struct Token {
    std::string core;
    bool breaks_before = false;
    bool breaks_after = false;
};

Token make_token(std::string_view raw) {
    Token t;
    std::size_t b = 0;
    std::size_t e = raw.size();
    while (b < e) {
        auto n = punct_prefix(raw.substr(b, e - b));
        if (n == 0) break;
        b += n;
        t.breaks_before = true;
    }
    while (e > b) {
        auto n = punct_suffix(raw.substr(b, e - b));
        if (n == 0) break;
        e -= n;
        t.breaks_after = true;
    }
    t.core = std::string(raw.substr(b, e - b));
    return t;
}

std::string leading_alnum_lower(std::string_view s) {
    std::string out;
    for (char c : s) {
        auto u = static_cast<unsigned char>(c);
        if (u >= 0x80 || !std::isalnum(u)) break;
        out.push_back(static_cast<char>(std::tolower(u)));
    }
    return out;
}

std::vector<std::string_view> sentences(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '.' || s[i] == '!' || s[i] == '?') {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    if (start < s.size()) out.push_back(s.substr(start));
    return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::vector<std::string> sentence_entities(std::string_view sentence) {
    std::vector<Token> tokens;
    for (auto raw : split_ws(sentence)) tokens.push_back(make_token(raw));

    std::vector<std::string> entities;
    std::vector<std::size_t> run; // token indices of the current run

    auto close_run = [&] {
        if (run.empty()) return;
        if (run.front() == 0 && is_stopword(leading_alnum_lower(tokens[0].core))) {
            run.erase(run.begin());
        }
        if (!run.empty()) {
            std::string label;
            for (auto idx : run) {
                if (!label.empty()) label.push_back(' ');
                label += tokens[idx].core;
            }
            entities.push_back(std::move(label));
        }
        run.clear();
    };

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        bool capital = !t.core.empty() && std::isupper(static_cast<unsigned char>(t.core[0]));
        if (!capital || t.breaks_before) close_run();
        if (capital) run.push_back(i);
        if (t.breaks_after) close_run();
    }
    close_run();
    return entities;
}

} // namespace

GraphDelta fallback_extract(std::string_view text) {
    GraphDelta delta;
    delta.turn_label = text::trim(text);
    for (auto sentence : sentences(text)) {
        auto entities = sentence_entities(sentence);
        for (std::size_t i = 0; i < entities.size(); ++i) {
            delta.nodes.push_back({entities[i], NodeKind::Entity});
            if (i > 0) {
                delta.edges.push_back({entities[i - 1], entities[i], EdgeKind::RELATES_TO,
                                       kFallbackRelationConfidence});
            }
        }
    }
    return delta;
}

std::set<std::string> fallback_concept_keys(std::string_view text) {
    std::set<std::string> keys;
    for (const auto& n : fallback_extract(text).nodes) keys.insert(text::canonical_key(n.label));
    return keys;
}

GraphDelta delta_from_extractor_json(const nlohmann::json& payload, std::string_view turn_text) {
    if (!payload.is_object()) throw UnusableOutput("extractor payload is not an object");

    GraphDelta delta;
    delta.turn_label = text::trim(turn_text);

    auto list = [&](const char* key) -> const nlohmann::json* {
        if (!payload.contains(key)) return nullptr;
        const auto& v = payload.at(key);
        if (!v.is_array()) throw UnusableOutput(std::string("extractor '") + key + "' is not an array");
        return &v;
    };
    auto str = [](const nlohmann::json& obj, const char* key) -> std::string {
        if (!obj.contains(key) || !obj.at(key).is_string()) {
            throw UnusableOutput(std::string("extractor item lacks string '") + key + "'");
        }
        return obj.at(key).get<std::string>();
    };

    if (const auto* entities = list("entities")) {
        for (const auto& e : *entities) {
            if (!e.is_object()) throw UnusableOutput("extractor entity is not an object");
            auto label = text::trim(str(e, "label"));
            if (label.empty()) continue;
            NodeKind kind = NodeKind::Entity;
            if (e.contains("kind") && e["kind"].is_string()) {
                auto k = node_kind_from_string(e["kind"].get<std::string>());
                if (k && *k != NodeKind::Turn) kind = *k;
            }
            delta.nodes.push_back({label, kind});
        }
    }
    if (const auto* relations = list("relations")) {
        for (const auto& r : *relations) {
            if (!r.is_object()) throw UnusableOutput("extractor relation is not an object");
            GraphDelta::EdgeSpec edge;
            edge.src_label = text::trim(str(r, "src"));
            edge.dst_label = text::trim(str(r, "dst"));
            if (r.contains("kind") && r["kind"].is_string()) {
                edge.kind = edge_kind_from_string(r["kind"].get<std::string>())
                                .value_or(EdgeKind::RELATES_TO);
            }
            if (r.contains("confidence") && r["confidence"].is_number()) {
                edge.confidence = std::clamp(r["confidence"].get<double>(), 0.0, 1.0);
            }
            delta.edges.push_back(std::move(edge));
        }
    }
    return delta;
}

} // namespace mnemos
