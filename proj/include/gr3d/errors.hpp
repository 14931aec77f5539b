#pragma once

#include <stdexcept>
#include <string>

namespace gr3d {

/// Base class for all pipeline errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad configuration: unknown keys, out-of-range values, unsupported version.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Bad or insufficient input data: missing files, malformed rasters,
/// inconsistent manifests, degenerate point sets.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what) {}
};

/// Transport-level failures talking to a chat endpoint.
class NetworkError : public Error {
public:
    explicit NetworkError(const std::string& what) : Error(what) {}
};

/// Authentication rejected by the endpoint; never retried.
class AuthError : public NetworkError {
public:
    explicit AuthError(const std::string& what) : NetworkError(what) {}
};

} // namespace gr3d
