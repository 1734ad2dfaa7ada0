#include "mnemos/ingestion.hpp"

#include "mnemos/extraction.hpp"
#include "mnemos/text.hpp"

#include <chrono>

namespace mnemos {

std::vector<TextWindow> chunk_text(std::string_view input, std::size_t size, std::size_t overlap) {
    if (size <= overlap) throw InvalidArgument("chunk size must exceed overlap");
    auto cps = text::code_points(input);
    std::vector<TextWindow> out;
    const std::size_t stride = size - overlap;
    for (std::size_t start = 0; start < cps.size(); start += stride) {
        auto end = std::min(start + size, cps.size());
        const char* first = cps[start].data();
        const char* last = cps[end - 1].data() + cps[end - 1].size();
        out.push_back({start, std::string(first, last)});
        if (end == cps.size()) break;
    }
    return out;
}

nlohmann::json to_json(const IngestReport& r) {
    return {{"doc_name", r.doc_name},
            {"chunk_count", r.chunk_count},
            {"concept_keys_attached", r.concept_keys_attached},
            {"elapsed_ms", r.elapsed_ms}};
}

Ingestor::Ingestor(Recorder& recorder, const Embedder& embedder, ChunkingConfig chunking)
    : recorder_(recorder), embedder_(embedder), chunking_(chunking) {
    if (chunking_.size <= chunking_.overlap) throw InvalidArgument("chunk size must exceed overlap");
}

IngestReport Ingestor::ingest_document(const std::string& name, std::string_view body, Timestamp ts) {
    if (text::trim(name).empty()) throw InvalidArgument("document name must not be empty");
    if (body.empty()) throw InvalidArgument("empty document");
    if (ts <= 0) throw InvalidArgument("timestamp must be positive");

    auto started = std::chrono::steady_clock::now();

    std::shared_ptr<std::mutex> doc_lock;
    {
        std::lock_guard lock(docs_mutex_);
        auto& slot = doc_locks_[name];
        if (!slot) slot = std::make_shared<std::mutex>();
        doc_lock = slot;
    }
    std::lock_guard one_ingest_per_doc(*doc_lock);

    IngestReport report;
    report.doc_name = name;

    std::vector<Chunk> chunks;
    std::vector<std::string> entity_labels;
    for (auto& window : chunk_text(body, chunking_.size, chunking_.overlap)) {
        Chunk c;
        c.doc_name = name;
        c.ordinal = chunks.size();
        c.embedding = embedder_.embed(window.text);
        for (const auto& n : fallback_extract(window.text).nodes) {
            if (c.concept_keys.insert(text::canonical_key(n.label)).second) {
                entity_labels.push_back(n.label);
            }
        }
        c.created_at = ts;
        c.text = std::move(window.text);
        report.concept_keys_attached.insert(c.concept_keys.begin(), c.concept_keys.end());
        chunks.push_back(std::move(c));
    }
    std::vector<EmbeddingVector> label_vectors;
    label_vectors.reserve(entity_labels.size());
    for (const auto& label : entity_labels) label_vectors.push_back(embedder_.embed(label));

    report.chunk_count = chunks.size();
    recorder_.replace_document(name, std::move(chunks), ts);

    std::set<std::string> linked;
    for (std::size_t i = 0; i < entity_labels.size(); ++i) {
        if (!linked.insert(text::canonical_key(entity_labels[i])).second) continue;
        recorder_.upsert_node(entity_labels[i], NodeKind::Entity, label_vectors[i], ts, "doc:" + name);
    }

    report.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
    return report;
}

} // namespace mnemos
