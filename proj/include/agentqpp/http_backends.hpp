#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "agentqpp/agent_loop.hpp"
#include "agentqpp/retrieval.hpp"

namespace agentqpp {

/// Name of the environment variable holding the bearer token sent to every
/// HTTP backend. The token is never logged or written to run outputs.
inline constexpr const char* kAuthTokenEnv = "AGENTQPP_API_TOKEN";

struct HttpEndpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;    // starts with '/'
};

/// Accepts http:// URLs only. ConfigError otherwise.
HttpEndpoint parse_http_url(const std::string& url);

struct HttpOptions {
    std::chrono::milliseconds timeout{30000};
    std::optional<std::string> auth_token;  // defaults to $AGENTQPP_API_TOKEN
};

/// POST {"prompt","stop","max_tokens","temperature"} -> {"text","finish_reason"}.
/// When the server reports "stop" without naming the sequence, the hit stop
/// sequence is inferred from the last unclosed protocol tag in the text.
class HttpCompletionBackend final : public CompletionBackend {
public:
    /// A seed, when given, is forwarded as "seed" for servers that support it.
    HttpCompletionBackend(const std::string& url, double temperature = 0.0, HttpOptions options = {},
                          std::optional<std::uint64_t> seed = std::nullopt);
    CompletionResult complete(const CompletionRequest& request) override;

private:
    HttpEndpoint endpoint_;
    double temperature_;
    HttpOptions options_;
    std::optional<std::uint64_t> seed_;
};

/// POST {"query","documents":[{"docno","title","text"}]} -> {"scores":[...]}.
class HttpScorer final : public Scorer {
public:
    explicit HttpScorer(const std::string& url, HttpOptions options = {});
    std::vector<double> score(const std::string& query, std::span<const Document> docs) const override;

private:
    HttpEndpoint endpoint_;
    HttpOptions options_;
};

/// POST {"texts":[...]} -> {"vectors":[[...],...]}.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(const std::string& url, std::size_t dim, HttpOptions options = {});
    std::size_t dim() const override { return dim_; }
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) const override;

private:
    HttpEndpoint endpoint_;
    std::size_t dim_;
    HttpOptions options_;
};

/// Which of `stops` the text most plausibly stopped on, judged by the last
/// opening tag that is not closed in `text`.
std::optional<std::string> infer_stop_sequence(std::string_view text, std::span<const std::string> stops);

}  // namespace agentqpp
