#include "mnemos/types.hpp"

#include <cmath>

namespace mnemos {

bool EmbeddingVector::is_zero() const {
    for (double v : values) {
        if (v != 0.0) return false;
    }
    return true;
}

double EmbeddingVector::norm() const {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw DimensionMismatch(a.dimension(), b.dimension());
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    double c = dot / std::sqrt(na * nb);
    // rounding can push |c| a hair past 1
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return c;
}

void normalize(EmbeddingVector& v) {
    double n = v.norm();
    if (n == 0.0) return;
    for (double& x : v.values) x /= n;
}

DimensionMismatch::DimensionMismatch(std::size_t expected_dim, std::size_t actual_dim)
    : Error("dimension mismatch: expected " + std::to_string(expected_dim) + ", got " +
            std::to_string(actual_dim)),
      expected(expected_dim),
      actual(actual_dim) {}

HttpStatusError::HttpStatusError(int code, const std::string& body)
    : Error("backend returned HTTP " + std::to_string(code) + (body.empty() ? "" : ": " + body)),
      status(code) {}

TransportExhausted::TransportExhausted(const std::string& what, int n)
    : Error("transport failed after " + std::to_string(n) + " attempts: " + what), attempts(n) {}

CorruptLog::CorruptLog(std::uint64_t at_seq, const std::string& why)
    : Error("corrupt log at seq " + std::to_string(at_seq) + ": " + why), seq(at_seq) {}

} // namespace mnemos
