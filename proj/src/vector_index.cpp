#include "mnemos/vector_index.hpp"

#include <algorithm>
#include <mutex>

namespace mnemos {

VectorIndex::VectorIndex(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw InvalidArgument("index dimension must be positive");
}

ChunkId VectorIndex::insert_locked(Chunk chunk) {
    if (auto it = by_position_.find({chunk.doc_name, chunk.ordinal}); it != by_position_.end()) {
        chunks_.erase(it->second);
        by_position_.erase(it);
    }
    chunk.id = next_id_++;
    by_position_[{chunk.doc_name, chunk.ordinal}] = chunk.id;
    auto id = chunk.id;
    chunks_.emplace(id, std::move(chunk));
    return id;
}

ChunkId VectorIndex::add_chunk(Chunk chunk) {
    if (chunk.embedding.dimension() != dimension_) {
        throw DimensionMismatch(dimension_, chunk.embedding.dimension());
    }
    std::unique_lock lock(mutex_);
    return insert_locked(std::move(chunk));
}

std::vector<SearchHit> VectorIndex::knn(const EmbeddingVector& query, std::size_t k,
                                        const std::optional<std::set<std::string>>& filter) const {
    if (k == 0) throw InvalidArgument("k must be at least 1");
    if (query.dimension() != dimension_) throw DimensionMismatch(dimension_, query.dimension());

    std::shared_lock lock(mutex_);
    std::vector<SearchHit> hits;
    hits.reserve(chunks_.size());
    for (const auto& [id, c] : chunks_) {
        if (filter) {
            bool tagged = std::any_of(c.concept_keys.begin(), c.concept_keys.end(),
                                      [&](const std::string& key) { return filter->contains(key); });
            if (!tagged) continue;
        }
        hits.push_back({id, cosine(query, c.embedding)});
    }

    auto keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      [](const SearchHit& a, const SearchHit& b) {
                          if (a.cosine != b.cosine) return a.cosine > b.cosine;
                          return a.chunk_id < b.chunk_id;
                      });
    hits.resize(keep);
    return hits;
}

std::size_t VectorIndex::remove_doc_locked(std::string_view doc_name) {
    std::size_t removed = 0;
    for (auto it = by_position_.begin(); it != by_position_.end();) {
        if (it->first.first == doc_name) {
            chunks_.erase(it->second);
            it = by_position_.erase(it);
            ++removed;
        } else {
            ++it;
        }
    }
    return removed;
}

std::size_t VectorIndex::remove_doc(std::string_view doc_name) {
    std::unique_lock lock(mutex_);
    return remove_doc_locked(doc_name);
}

VectorIndex::Replacement VectorIndex::replace_document(std::string_view doc_name,
                                                   std::vector<Chunk> chunks) {
    for (const auto& c : chunks) {
        if (c.embedding.dimension() != dimension_) {
            throw DimensionMismatch(dimension_, c.embedding.dimension());
        }
        if (c.doc_name != doc_name) throw InvalidArgument("chunk belongs to another document");
    }
    std::unique_lock lock(mutex_);
    Replacement out;
    out.removed = remove_doc_locked(doc_name);
    out.ids.reserve(chunks.size());
    for (auto& c : chunks) out.ids.push_back(insert_locked(std::move(c)));
    return out;
}

std::optional<Chunk> VectorIndex::get(ChunkId id) const {
    std::shared_lock lock(mutex_);
    auto it = chunks_.find(id);
    if (it == chunks_.end()) return std::nullopt;
    return it->second;
}

std::vector<Chunk> VectorIndex::chunks() const {
    std::shared_lock lock(mutex_);
    std::vector<Chunk> out;
    out.reserve(chunks_.size());
    for (const auto& [id, c] : chunks_) out.push_back(c);
    return out;
}

std::size_t VectorIndex::size() const {
    std::shared_lock lock(mutex_);
    return chunks_.size();
}

nlohmann::json VectorIndex::snapshot() const {
    std::shared_lock lock(mutex_);
    auto chunks = nlohmann::json::array();
    for (const auto& [id, c] : chunks_) {
        chunks.push_back({
            {"id", c.id},
            {"doc_name", c.doc_name},
            {"ordinal", c.ordinal},
            {"text", c.text},
            {"embedding", c.embedding.values},
            {"concept_keys", c.concept_keys},
            {"created_at", c.created_at},
        });
    }
    return {{"dimension", dimension_}, {"chunks", std::move(chunks)}};
}

} // namespace mnemos
