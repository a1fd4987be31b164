#pragma once

#include <stdexcept>
#include <string>

namespace nplb {

// Error taxonomy; the CLI maps these onto exit codes
// (config -> usage, data/dimension/io -> data error, divergence -> numerical).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error("dimension error: " + what) {}
};

class ValueError : public Error {
public:
    explicit ValueError(const std::string& what) : Error("value error: " + what) {}
};

// Bad configuration supplied by the caller (e.g. odd NPLB power).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config error: " + what) {}
};

// Malformed or unusable input data (files, cohorts, empty results).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error("data error: " + what) {}
};

class FactorizationError : public Error {
public:
    explicit FactorizationError(const std::string& what) : Error("factorization error: " + what) {}
};

class SamplingError : public Error {
public:
    explicit SamplingError(const std::string& what) : Error("sampling error: " + what) {}
};

class TraceError : public Error {
public:
    explicit TraceError(const std::string& what) : Error("trace error: " + what) {}
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& what) : Error("divergence: " + what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io error: " + what) {}
};

}  // namespace nplb
