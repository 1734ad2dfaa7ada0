#pragma once

#include "mnemos/embedder.hpp"
#include "mnemos/llm_gateway.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing {

inline mnemos::EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dim = 64) {
    std::normal_distribution<double> g(0.0, 1.0);
    mnemos::EmbeddingVector v;
    v.values.resize(dim);
    for (auto& x : v.values) x = g(rng);
    mnemos::normalize(v);
    return v;
}

inline mnemos::EmbeddingVector axis(std::size_t i, std::size_t dim = 64) {
    mnemos::EmbeddingVector v;
    v.values.assign(dim, 0.0);
    v.values[i] = 1.0;
    return v;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("mnemos-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::shared_ptr<mnemos::LlmGateway> gateway_for(std::shared_ptr<mnemos::ScriptedBackend> mock,
                                                       std::vector<std::chrono::milliseconds>* sleeps = nullptr) {
    return mnemos::LlmGateway::single(std::move(mock), {}, [sleeps](std::chrono::milliseconds d) {
        if (sleeps) sleeps->push_back(d);
    });
}

inline const char* kEmptyExtraction = R"({"entities":[],"relations":[]})";

} // namespace testing
