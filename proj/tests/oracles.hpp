#pragma once

// Test-only reference implementations. Written from the contracts, not from
// the library sources, and deliberately naive.

#include "mnemos/memory_graph.hpp"
#include "mnemos/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// ── embedder ────────────────────────────────────────────────────────

inline std::vector<std::uint32_t> decode_utf8(const std::string& s) {
    std::vector<std::uint32_t> cps;
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = s[i];
        int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
        std::uint32_t cp = len == 1 ? c : c & (0x7F >> len);
        for (int k = 1; k < len && i + k < s.size(); ++k) cp = (cp << 6) | (s[i + k] & 0x3F);
        cps.push_back(cp);
        i += len;
    }
    return cps;
}

inline std::string encode_utf8(const std::vector<std::uint32_t>& cps) {
    std::string out;
    for (auto cp : cps) {
        if (cp < 0x80) {
            out += char(cp);
        } else if (cp < 0x800) {
            out += char(0xC0 | (cp >> 6));
            out += char(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += char(0xE0 | (cp >> 12));
            out += char(0x80 | ((cp >> 6) & 0x3F));
            out += char(0x80 | (cp & 0x3F));
        } else {
            out += char(0xF0 | (cp >> 18));
            out += char(0x80 | ((cp >> 12) & 0x3F));
            out += char(0x80 | ((cp >> 6) & 0x3F));
            out += char(0x80 | (cp & 0x3F));
        }
    }
    return out;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::vector<double> embed(const std::string& text, std::size_t dim = 64) {
    std::vector<double> v(dim, 0.0);
    auto cps = decode_utf8(text);
    std::vector<std::vector<std::uint32_t>> words(1);
    for (auto cp : cps) {
        bool word_char = cp >= 0x80 || (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
                         (cp >= 'A' && cp <= 'Z');
        if (word_char) {
            words.back().push_back(cp >= 'A' && cp <= 'Z' ? cp + 32 : cp);
        } else if (!words.back().empty()) {
            words.emplace_back();
        }
    }
    for (const auto& w : words) {
        if (w.empty()) continue;
        std::vector<std::string> tokens{encode_utf8(w)};
        for (std::size_t i = 0; i + 3 <= w.size(); ++i) {
            tokens.push_back(encode_utf8({w[i], w[i + 1], w[i + 2]}));
        }
        for (const auto& t : tokens) {
            auto h = fnv1a(t);
            v[h % dim] += (h >> 63) ? -1.0 : 1.0;
        }
    }
    double n = 0;
    for (double x : v) n += x * x;
    if (n > 0) {
        n = std::sqrt(n);
        for (double& x : v) x /= n;
    }
    return v;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0;
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

// ── vector index ────────────────────────────────────────────────────

struct Hit {
    std::uint64_t id;
    double cos;
};

inline std::vector<Hit> knn(const std::vector<mnemos::Chunk>& chunks, const std::vector<double>& q,
                            std::size_t k, const std::set<std::string>* filter = nullptr) {
    std::vector<Hit> all;
    for (const auto& c : chunks) {
        if (filter) {
            bool hit = false;
            for (const auto& key : c.concept_keys) hit = hit || filter->count(key) > 0;
            if (!hit) continue;
        }
        all.push_back({c.id, cosine(q, c.embedding.values)});
    }
    std::stable_sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
        return a.cos > b.cos || (a.cos == b.cos && a.id < b.id);
    });
    if (all.size() > k) all.resize(k);
    return all;
}

// ── graph ───────────────────────────────────────────────────────────

// All-pairs hop counts by Floyd-Warshall over the undirected graph.
inline std::map<std::pair<std::uint64_t, std::uint64_t>, int> hop_matrix(
    const std::vector<mnemos::ConceptNode>& nodes, const std::vector<mnemos::RelationEdge>& edges) {
    const int inf = 1 << 20;
    std::vector<std::uint64_t> ids;
    for (const auto& n : nodes) ids.push_back(n.id);
    std::map<std::uint64_t, std::size_t> pos;
    for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = i;
    std::vector<std::vector<int>> d(ids.size(), std::vector<int>(ids.size(), inf));
    for (std::size_t i = 0; i < ids.size(); ++i) d[i][i] = 0;
    for (const auto& e : edges) {
        auto a = pos.at(e.src), b = pos.at(e.dst);
        d[a][b] = d[b][a] = 1;
    }
    for (std::size_t m = 0; m < ids.size(); ++m)
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < ids.size(); ++j)
                if (d[i][m] + d[m][j] < d[i][j]) d[i][j] = d[i][m] + d[m][j];
    std::map<std::pair<std::uint64_t, std::uint64_t>, int> out;
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < ids.size(); ++j)
            if (d[i][j] < inf) out[{ids[i], ids[j]}] = d[i][j];
    return out;
}

struct Scored {
    std::uint64_t id;
    double score, semantic, recency, proximity;
};

inline std::vector<Scored> query_nodes(const std::vector<mnemos::ConceptNode>& nodes,
                                       const std::vector<mnemos::RelationEdge>& edges,
                                       const mnemos::NodeQuery& q, const mnemos::GraphConfig& cfg = {}) {
    auto hops = hop_matrix(nodes, edges);
    std::vector<Scored> all;
    for (const auto& n : nodes) {
        if (q.window && (n.last_seen < q.window->from || n.last_seen > q.window->to)) continue;
        Scored s{n.id, 0, 0, 0, 0};
        s.semantic = (cosine(q.embedding.values, n.embedding.values) + 1.0) / 2.0;
        double age = std::max<double>(0.0, double(q.now - n.last_seen));
        s.recency = std::exp(-age / cfg.recency_tau_ms);
        int best = -1;
        for (auto seed : q.seeds) {
            auto it = hops.find({seed, n.id});
            if (it != hops.end() && it->second <= cfg.max_proximity_hops &&
                (best < 0 || it->second < best))
                best = it->second;
        }
        s.proximity = best < 0 ? 0.0 : 1.0 / (1.0 + best);
        s.score = cfg.semantic_weight * s.semantic + cfg.recency_weight * s.recency +
                  cfg.proximity_weight * s.proximity;
        all.push_back(s);
    }
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
        return a.score > b.score || (a.score == b.score && a.id < b.id);
    });
    if (all.size() > q.k) all.resize(q.k);
    return all;
}

// Node ids within `hops` of any start node (plain queue BFS).
inline std::set<std::uint64_t> bfs(const std::vector<mnemos::RelationEdge>& edges,
                                   const std::vector<std::uint64_t>& start, int hops) {
    std::map<std::uint64_t, std::vector<std::uint64_t>> adj;
    for (const auto& e : edges) {
        adj[e.src].push_back(e.dst);
        adj[e.dst].push_back(e.src);
    }
    std::map<std::uint64_t, int> dist;
    std::queue<std::uint64_t> q;
    for (auto s : start) {
        dist[s] = 0;
        q.push(s);
    }
    while (!q.empty()) {
        auto u = q.front();
        q.pop();
        if (dist[u] == hops) continue;
        for (auto v : adj[u]) {
            if (!dist.count(v)) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
        }
    }
    std::set<std::uint64_t> out;
    for (const auto& [id, d] : dist) out.insert(id);
    return out;
}

// ── metrics ─────────────────────────────────────────────────────────

inline std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        unsigned char c = ch;
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
            cur += ch;
        } else if (c >= 'A' && c <= 'Z') {
            cur += char(c + 32);
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct PRF {
    double p, r, f;
};

inline PRF prf(double overlap, double ref_n, double cand_n) {
    double r = ref_n ? overlap / ref_n : 0, p = cand_n ? overlap / cand_n : 0;
    return {p, r, p + r > 0 ? 2 * p * r / (p + r) : 0};
}

// Overlap counted by repeatedly matching and consuming candidate n-grams.
inline PRF rouge_n(const std::string& ref, const std::string& cand, int n) {
    auto rt = tokens(ref), ct = tokens(cand);
    std::vector<std::string> rg, cg;
    for (int i = 0; i + n <= int(rt.size()); ++i) {
        std::string g;
        for (int k = 0; k < n; ++k) g += rt[i + k] + '\x1f';
        rg.push_back(g);
    }
    for (int i = 0; i + n <= int(ct.size()); ++i) {
        std::string g;
        for (int k = 0; k < n; ++k) g += ct[i + k] + '\x1f';
        cg.push_back(g);
    }
    std::multiset<std::string> pool(rg.begin(), rg.end());
    double overlap = 0;
    for (const auto& g : cg) {
        auto it = pool.find(g);
        if (it != pool.end()) {
            pool.erase(it);
            ++overlap;
        }
    }
    return prf(overlap, double(rg.size()), double(cg.size()));
}

// LCS by full 2-D table.
inline PRF rouge_l(const std::string& ref, const std::string& cand) {
    auto a = tokens(ref), b = tokens(cand);
    std::vector<std::vector<int>> t(a.size() + 1, std::vector<int>(b.size() + 1, 0));
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    return prf(t[a.size()][b.size()], double(a.size()), double(b.size()));
}

} // namespace oracle
