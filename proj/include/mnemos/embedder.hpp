#pragma once

#include "mnemos/types.hpp"

#include <chrono>
#include <string>
#include <string_view>

namespace mnemos {

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed(std::string_view text) const = 0;
    virtual std::size_t dimension() const = 0;
};

/// Deterministic feature-hashing embedder.
///
/// Each lowercased word contributes itself and every character trigram of
/// itself; each token is hashed with 64-bit FNV-1a and adds +1 or -1 (by the
/// hash's top bit) to bucket `hash % dimension`. The result is L2-normalized.
/// Text with no word characters maps to the zero vector.
class HashingEmbedder final : public Embedder {
public:
    static constexpr std::size_t kDefaultDimension = 64;

    explicit HashingEmbedder(std::size_t dimension = kDefaultDimension);

    EmbeddingVector embed(std::string_view text) const override;
    std::size_t dimension() const override { return dimension_; }

    static std::uint64_t fnv1a64(std::string_view bytes);

private:
    std::size_t dimension_;
};

/// Embedder backed by an HTTP endpoint.
///
/// Wire format: POST {"input": text} -> {"embedding": [real, ...]}. The
/// returned vector is re-normalized to unit length. Errors are split so the
/// caller can tell retryable failures from configuration bugs:
/// TransportError / TimeoutError for network trouble, HttpStatusError for
/// non-2xx answers, DimensionMismatch when the vector length is wrong.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(std::string endpoint, std::size_t dimension,
                   std::chrono::milliseconds timeout = std::chrono::seconds(10),
                   std::string bearer_token = {});

    EmbeddingVector embed(std::string_view text) const override;
    std::size_t dimension() const override { return dimension_; }

private:
    std::string endpoint_;
    std::size_t dimension_;
    std::chrono::milliseconds timeout_;
    std::string bearer_token_;
};

} // namespace mnemos
