#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mnemos {

// Milliseconds since the Unix epoch, UTC. Always supplied by the caller.
using Timestamp = std::int64_t;

using NodeId = std::uint64_t;
using EdgeId = std::uint64_t;
using ChunkId = std::uint64_t;

constexpr Timestamp kMillisPerDay = 24LL * 60 * 60 * 1000;

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const { return values.size(); }
    bool is_zero() const;
    double norm() const;

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

// Cosine similarity; 0 when either side is the zero vector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Scales to unit L2 norm in place. Zero vectors are left untouched.
void normalize(EmbeddingVector& v);

// ── Error hierarchy ─────────────────────────────────────────────────

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t expected, std::size_t actual);
    std::size_t expected;
    std::size_t actual;
};

// Network-level failure (connection refused, reset, DNS...). Retryable.
class TransportError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public TransportError {
public:
    using TransportError::TransportError;
};

// Backend answered with a non-2xx status. Usually a config problem.
class HttpStatusError : public Error {
public:
    HttpStatusError(int status, const std::string& body);
    int status;
};

// Retries exhausted on a transport failure.
class TransportExhausted : public Error {
public:
    TransportExhausted(const std::string& what, int attempts);
    int attempts;
};

// LLM text that should have carried a JSON object but did not.
class UnusableOutput : public Error {
public:
    using Error::Error;
};

class NoJsonObject : public UnusableOutput {
public:
    using UnusableOutput::UnusableOutput;
};

class MalformedJson : public UnusableOutput {
public:
    using UnusableOutput::UnusableOutput;
};

// Every reflection iteration failed to obtain an answer.
class LlmExhausted : public Error {
public:
    using Error::Error;
};

class CorruptLog : public Error {
public:
    CorruptLog(std::uint64_t seq, const std::string& why);
    std::uint64_t seq;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace mnemos
