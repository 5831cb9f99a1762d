#include "agentqpp/http_backends.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "agentqpp/error.hpp"

namespace agentqpp {

using json = nlohmann::json;

HttpEndpoint parse_http_url(const std::string& url) {
    constexpr std::string_view scheme = "http://";
    if (url.rfind(scheme, 0) != 0) throw ConfigError("only http:// URLs are supported: " + url);
    const auto slash = url.find('/', scheme.size());
    HttpEndpoint ep;
    ep.origin = url.substr(0, slash);
    ep.path = slash == std::string::npos ? "/" : url.substr(slash);
    if (ep.origin.size() == scheme.size()) throw ConfigError("URL has no host: " + url);
    return ep;
}

namespace {

std::optional<std::string> resolve_token(const HttpOptions& opts) {
    if (opts.auth_token) return opts.auth_token;
    if (const char* env = std::getenv(kAuthTokenEnv); env && *env) return std::string(env);
    return std::nullopt;
}

json post_json(const HttpEndpoint& ep, const HttpOptions& opts, const json& body) {
    httplib::Client cli(ep.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (auto token = resolve_token(opts)) headers.emplace("Authorization", "Bearer " + *token);

    auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportError(ep.origin + ep.path + ": " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransportError(ep.origin + ep.path + ": HTTP " + std::to_string(res->status));
    }
    if (res->status < 200 || res->status >= 300) {
        throw ConfigError(ep.origin + ep.path + ": HTTP " + std::to_string(res->status));
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw ParseError(ep.origin + ep.path + ": invalid JSON response: " + e.what());
    }
}

}  // namespace

std::optional<std::string> infer_stop_sequence(std::string_view text, std::span<const std::string> stops) {
    std::optional<std::string> best;
    std::size_t best_pos = 0;
    for (const auto& stop : stops) {
        // "</tag>" closes "<tag>"
        if (stop.size() < 4 || stop.rfind("</", 0) != 0) continue;
        const std::string open = "<" + stop.substr(2);
        const auto o = text.rfind(open);
        if (o == std::string_view::npos) continue;
        const auto c = text.find(stop, o);
        if (c != std::string_view::npos) continue;
        if (!best || o > best_pos) {
            best = stop;
            best_pos = o;
        }
    }
    return best;
}

HttpCompletionBackend::HttpCompletionBackend(const std::string& url, double temperature, HttpOptions options,
                                             std::optional<std::uint64_t> seed)
    : endpoint_(parse_http_url(url)), temperature_(temperature), options_(std::move(options)), seed_(seed) {}

CompletionResult HttpCompletionBackend::complete(const CompletionRequest& request) {
    json body = {{"prompt", request.context},
                 {"stop", request.stop_sequences},
                 {"max_tokens", request.max_tokens},
                 {"temperature", temperature_}};
    if (seed_) body["seed"] = *seed_;
    const auto resp = post_json(endpoint_, options_, body);
    CompletionResult out;
    try {
        out.text = resp.at("text").get<std::string>();
        const auto reason = resp.value("finish_reason", std::string("stop"));
        if (reason == "length") {
            out.finish = FinishReason::length();
        } else if (reason == "stop") {
            // Servers differ on whether they echo the stop string; strip it if present.
            auto trimmed = apply_stop_sequences(out.text, request.stop_sequences);
            if (trimmed.finish.kind == FinishKind::stop_sequence_hit) {
                out = std::move(trimmed);
            } else if (resp.contains("stop_sequence") && resp["stop_sequence"].is_string()) {
                out.finish = FinishReason::stop(resp["stop_sequence"].get<std::string>());
            } else if (auto which = infer_stop_sequence(out.text, request.stop_sequences)) {
                out.finish = FinishReason::stop(*which);
            } else {
                out.finish = FinishReason::end_of_text();
            }
        } else {
            out.finish = FinishReason::end_of_text();
        }
    } catch (const json::exception& e) {
        throw ParseError("completion response: " + std::string(e.what()));
    }
    return out;
}

HttpScorer::HttpScorer(const std::string& url, HttpOptions options)
    : endpoint_(parse_http_url(url)), options_(std::move(options)) {}

std::vector<double> HttpScorer::score(const std::string& query, std::span<const Document> docs) const {
    json body = {{"query", query}, {"documents", json::array()}};
    for (const auto& d : docs) body["documents"].push_back({{"docno", d.docno}, {"title", d.title}, {"text", d.text}});
    const auto resp = post_json(endpoint_, options_, body);
    try {
        return resp.at("scores").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ParseError("scoring response: " + std::string(e.what()));
    }
}

HttpEmbedder::HttpEmbedder(const std::string& url, std::size_t dim, HttpOptions options)
    : endpoint_(parse_http_url(url)), dim_(dim), options_(std::move(options)) {
    if (dim_ == 0) throw ConfigError("embedder dimension must be >= 1");
}

std::vector<std::vector<double>> HttpEmbedder::embed(std::span<const std::string> texts) const {
    const json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    const auto resp = post_json(endpoint_, options_, body);
    std::vector<std::vector<double>> out;
    try {
        out = resp.at("vectors").get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
        throw ParseError("embedding response: " + std::string(e.what()));
    }
    if (out.size() != texts.size()) {
        throw ConfigError("embedding service returned " + std::to_string(out.size()) + " vectors for " +
                          std::to_string(texts.size()) + " texts");
    }
    for (const auto& v : out) {
        if (v.size() != dim_) {
            throw ConfigError("embedding service returned dimension " + std::to_string(v.size()) + ", expected " +
                              std::to_string(dim_));
        }
    }
    return out;
}

}  // namespace agentqpp
