#pragma once

#include <stdexcept>
#include <string>

namespace tbn {

/// Precondition violated by a caller-supplied value.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Tensor shapes do not agree for the requested operation.
class ShapeError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// A segment has fewer frames than the number of requested segments.
class TooShortSegment : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Configuration is malformed or inconsistent (unknown keys, class-count mismatch, ...).
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// File-system or format failure; the message carries the offending path.
class IoError : public std::runtime_error {
public:
    IoError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace tbn
