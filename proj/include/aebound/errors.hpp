#pragma once

#include <stdexcept>
#include <string>

namespace aebound {

enum class DataErrorCode {
    io,
    wrong_magic,
    truncated,
    count_mismatch,
    malformed,
    dimension_mismatch,
};

/// Problems with input files or their contents.
class DataError : public std::runtime_error {
public:
    DataError(DataErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    DataErrorCode code() const noexcept { return code_; }

private:
    DataErrorCode code_;
};

/// Invalid experiment configuration.
class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A computation produced or required a value outside its valid range.
class NumericError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace aebound
