#include "mnemos/embedder.hpp"

#include "mnemos/http_util.hpp"
#include "mnemos/text.hpp"

#include <json.hpp>

namespace mnemos {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;
constexpr std::uint64_t kTopBit = 1ULL << 63;

} // namespace

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw InvalidArgument("embedding dimension must be positive");
}

std::uint64_t HashingEmbedder::fnv1a64(std::string_view bytes) {
    std::uint64_t h = kFnvOffset;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= kFnvPrime;
    }
    return h;
}

EmbeddingVector HashingEmbedder::embed(std::string_view input) const {
    EmbeddingVector out{std::vector<double>(dimension_, 0.0)};
    auto accumulate = [&](std::string_view token) {
        std::uint64_t h = fnv1a64(token);
        double sign = (h & kTopBit) ? -1.0 : 1.0;
        out.values[h % dimension_] += sign;
    };

    for (const auto& word : text::words(input)) {
        accumulate(word);
        auto cps = text::code_points(word);
        for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
            // code points of one word are contiguous in memory
            std::string_view tri(cps[i].data(), cps[i + 2].data() + cps[i + 2].size() - cps[i].data());
            accumulate(tri);
        }
    }
    normalize(out);
    return out;
}

RemoteEmbedder::RemoteEmbedder(std::string endpoint, std::size_t dimension,
                               std::chrono::milliseconds timeout, std::string bearer_token)
    : endpoint_(std::move(endpoint)),
      dimension_(dimension),
      timeout_(timeout),
      bearer_token_(std::move(bearer_token)) {}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
    nlohmann::json req = {{"input", std::string(text)}};
    auto res = http::post_json(endpoint_, req.dump(), timeout_, bearer_token_);
    if (res.status < 200 || res.status >= 300) throw HttpStatusError(res.status, res.body);

    EmbeddingVector out;
    try {
        auto body = nlohmann::json::parse(res.body);
        out.values = body.at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw HttpStatusError(res.status, std::string("unreadable embedding response: ") + e.what());
    }
    if (out.dimension() != dimension_) throw DimensionMismatch(dimension_, out.dimension());
    normalize(out);
    return out;
}

} // namespace mnemos
