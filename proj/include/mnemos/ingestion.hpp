#pragma once

#include "mnemos/embedder.hpp"
#include "mnemos/persistence.hpp"

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

namespace mnemos {

struct TextWindow {
    std::size_t start = 0; // in code points
    std::string text;
};

struct ChunkingConfig {
    std::size_t size = 512;
    std::size_t overlap = 64;
};

/// Fixed windows of `size` code points advancing by `size - overlap`; the
/// last window may be short. Never splits a UTF-8 code point. Throws
/// InvalidArgument when size <= overlap.
std::vector<TextWindow> chunk_text(std::string_view text, std::size_t size = 512,
                                   std::size_t overlap = 64);

struct IngestReport {
    std::string doc_name;
    std::size_t chunk_count = 0;
    std::set<std::string> concept_keys_attached;
    std::int64_t elapsed_ms = 0;
};

nlohmann::json to_json(const IngestReport& r);

/// Chunks, embeds and tags a document, then swaps it into the index in one
/// step. Every chunk is embedded before the index is touched, so a failing
/// embedder leaves the previous version of the document in place.
///
/// Extracted concepts are also upserted as Entity nodes (session
/// "doc:<name>") so graph-guided chunk filtering can reach them.
class Ingestor {
public:
    Ingestor(Recorder& recorder, const Embedder& embedder, ChunkingConfig chunking = {});

    IngestReport ingest_document(const std::string& name, std::string_view text, Timestamp ts);

private:
    Recorder& recorder_;
    const Embedder& embedder_;
    ChunkingConfig chunking_;
    std::mutex docs_mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> doc_locks_;
};

} // namespace mnemos
