#pragma once

#include "mnemos/memory_graph.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace mnemos {

struct GraphDelta {
    struct NodeSpec {
        std::string label;
        NodeKind kind = NodeKind::Entity;
    };
    struct EdgeSpec {
        std::string src_label;
        std::string dst_label;
        EdgeKind kind = EdgeKind::RELATES_TO;
        double confidence = 0.5;
    };

    std::vector<NodeSpec> nodes;
    std::vector<EdgeSpec> edges;
    std::string turn_label;
};

// Confidence given to edges between neighbouring fallback entities.
inline constexpr double kFallbackRelationConfidence = 0.5;

/// Deterministic extraction used when no usable extractor output exists.
///
/// Sentences end at '.', '!' or '?'. An entity is a maximal run of
/// whitespace-separated tokens starting with an uppercase letter; punctuation
/// attached to a token closes the run. The sentence-initial token is left out
/// of its run when it (its leading alphanumeric part, lowercased) is a
/// stopword, so "The Toyota Prius" yields "Toyota Prius" and a lone "We"
/// yields nothing. Neighbouring entities in one sentence get a RELATES_TO
/// edge.
GraphDelta fallback_extract(std::string_view text);

// Canonical keys of the fallback entities, as attached to ingested chunks.
std::set<std::string> fallback_concept_keys(std::string_view text);

/// Reads {"entities":[{"label","kind"}], "relations":[{"src","dst","kind",
/// "confidence"}]}. Missing arrays count as empty; unknown entity kinds map
/// to Entity and unknown relation kinds to RELATES_TO. Anything structurally
/// off throws UnusableOutput.
GraphDelta delta_from_extractor_json(const nlohmann::json& payload, std::string_view turn_text);

} // namespace mnemos
