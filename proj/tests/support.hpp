#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "agentqpp/retrieval.hpp"

namespace testing {

namespace fs = std::filesystem;

// Removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("agentqpp-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
                 std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::shared_ptr<const agentqpp::DocumentStore> store_of(std::vector<agentqpp::Document> docs) {
    return std::make_shared<const agentqpp::DocumentStore>(std::move(docs));
}

inline agentqpp::RetrievalResources lexical_resources(std::vector<agentqpp::Document> docs) {
    auto store = store_of(std::move(docs));
    agentqpp::RetrievalResources r;
    r.docs = store;
    r.lexical = std::make_shared<const agentqpp::LexicalIndex>(agentqpp::LexicalIndex::build(store));
    return r;
}

// Stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 0) {
    std::uint64_t h = 1469598103934665603ull ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace testing
