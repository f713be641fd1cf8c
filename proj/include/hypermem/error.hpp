#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hypermem {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller supplied arguments violating an operation's precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An id that does not resolve (entity, point, chunk, index entry).
class UnknownId : public Error {
public:
    UnknownId(const std::string& what, std::string id)
        : Error(what + ": unknown id '" + id + "'"), id_(std::move(id)) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// On-disk artifact is corrupt, truncated or of an unsupported schema version.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Configuration file or override is invalid.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Transport or provider-side failure after retries were exhausted.
class ProviderError : public Error {
public:
    using Error::Error;
};

/// Embedding provider failed; carries the batch that could not be embedded.
class RetrievalUnavailable : public ProviderError {
public:
    RetrievalUnavailable(const std::string& what, std::vector<std::string> batch)
        : ProviderError(what), failed_batch_(std::move(batch)) {}
    const std::vector<std::string>& failed_batch() const noexcept { return failed_batch_; }

private:
    std::vector<std::string> failed_batch_;
};

/// Scripted provider has no fixture for a request.
class FixtureMiss : public ProviderError {
public:
    FixtureMiss(const std::string& tag, const std::string& what)
        : ProviderError("fixture miss for tag '" + tag + "': " + what), tag_(tag) {}
    const std::string& tag() const noexcept { return tag_; }

private:
    std::string tag_;
};

/// Insertion of a hyperedge with fewer than two distinct vertices.
class DegenerateHyperedge : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// A local subquery references a memory point that is no longer live.
class StaleAnchor : public Error {
public:
    explicit StaleAnchor(std::string point_id)
        : Error("stale anchor: memory point '" + point_id + "' is retired"),
          point_id_(std::move(point_id)) {}
    const std::string& point_id() const noexcept { return point_id_; }

private:
    std::string point_id_;
};

/// Replaying a trace did not reproduce the recorded memory snapshot.
class ReplayDivergence : public Error {
public:
    ReplayDivergence(int step, const std::string& detail)
        : Error("replay diverged at step " + std::to_string(step) + ": " + detail), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

}  // namespace hypermem
