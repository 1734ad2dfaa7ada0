#pragma once

#include "mnemos/types.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

namespace mnemos {

struct Chunk {
    ChunkId id = 0;
    std::string doc_name;
    std::size_t ordinal = 0;
    std::string text;
    EmbeddingVector embedding;
    std::set<std::string> concept_keys;
    Timestamp created_at = 0;
};

struct SearchHit {
    ChunkId chunk_id = 0;
    double cosine = 0.0;
};

/// Exact cosine k-NN over document chunks.
///
/// Ids are assigned on insert, strictly increasing, never reused. A chunk
/// with an existing (doc_name, ordinal) replaces the old one under a new id.
/// Queries hold a shared lock, so they never see a half-applied write.
class VectorIndex {
public:
    explicit VectorIndex(std::size_t dimension);

    VectorIndex(const VectorIndex&) = delete;
    VectorIndex& operator=(const VectorIndex&) = delete;

    // The incoming chunk's id is ignored; returns the assigned id.
    ChunkId add_chunk(Chunk chunk);

    // Descending cosine, ties by ascending id. With a filter, only chunks
    // whose concept_keys intersect it are candidates.
    std::vector<SearchHit> knn(const EmbeddingVector& query, std::size_t k,
                               const std::optional<std::set<std::string>>& concept_filter = {}) const;

    std::size_t remove_doc(std::string_view doc_name);

    struct Replacement {
        std::size_t removed = 0;
        std::vector<ChunkId> ids;
    };

    // Atomically drops every chunk of `doc_name` and inserts `chunks`.
    // Validates all dimensions before touching state.
    Replacement replace_document(std::string_view doc_name, std::vector<Chunk> chunks);

    std::optional<Chunk> get(ChunkId id) const;
    std::vector<Chunk> chunks() const;
    std::size_t size() const;
    std::size_t dimension() const { return dimension_; }

    // Chunks ascending by id.
    nlohmann::json snapshot() const;

private:
    ChunkId insert_locked(Chunk chunk);
    std::size_t remove_doc_locked(std::string_view doc_name);

    std::size_t dimension_;
    mutable std::shared_mutex mutex_;
    ChunkId next_id_ = 1;
    std::map<ChunkId, Chunk> chunks_;
    std::map<std::pair<std::string, std::size_t>, ChunkId> by_position_;
};

} // namespace mnemos
