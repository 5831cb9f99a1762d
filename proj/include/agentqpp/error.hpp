#pragma once

#include <stdexcept>
#include <string>

namespace agentqpp {

// Coarse error classes. The C API maps these one-to-one onto status codes and
// the CLI maps them onto exit codes (internal -> 2, everything else -> 1).
enum class ErrorKind {
    argument,
    config,
    io,
    parse,
    not_found,
    transport,
    predictor_undefined,
    predictor_input,
    rerank,
    internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ArgumentError : Error {
    explicit ArgumentError(const std::string& w) : Error(ErrorKind::argument, w) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& w) : Error(ErrorKind::parse, w) {}
};
struct NotFoundError : Error {
    explicit NotFoundError(const std::string& w) : Error(ErrorKind::not_found, w) {}
};
/// Retryable failure talking to a remote backend.
struct TransportError : Error {
    explicit TransportError(const std::string& w) : Error(ErrorKind::transport, w) {}
};
struct PredictorUndefined : Error {
    explicit PredictorUndefined(const std::string& w) : Error(ErrorKind::predictor_undefined, w) {}
};
struct PredictorInputError : Error {
    explicit PredictorInputError(const std::string& w) : Error(ErrorKind::predictor_input, w) {}
};
struct RerankError : Error {
    explicit RerankError(const std::string& w) : Error(ErrorKind::rerank, w) {}
};

}  // namespace agentqpp
