#pragma once

#include <stdexcept>
#include <string>

namespace scenemap {

// Error categories map 1:1 onto process exit codes (config=1, data=2, internal=3).
enum class ErrorKind { Config = 1, Data = 2, Internal = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct InternalError : Error {
  explicit InternalError(const std::string& what) : Error(ErrorKind::Internal, what) {}
};

// Input / stream errors
struct MissingFileError : DataError {
  explicit MissingFileError(const std::string& path) : DataError("missing file: " + path) {}
};

struct MalformedManifestError : DataError {
  explicit MalformedManifestError(const std::string& what) : DataError("malformed manifest: " + what) {}
};

struct NonMonotoneIndexError : DataError {
  explicit NonMonotoneIndexError(const std::string& what) : DataError("non-monotone frame index: " + what) {}
};

struct PredictionMissingError : DataError {
  explicit PredictionMissingError(const std::string& what) : DataError("prediction missing: " + what) {}
};

struct InvalidSpecError : ConfigError {
  explicit InvalidSpecError(const std::string& what) : ConfigError("invalid scene spec: " + what) {}
};

// Alignment errors
struct NoValidScaleError : DataError {
  explicit NoValidScaleError(const std::string& what) : DataError("no valid scale: " + what) {}
};

struct NonPositiveScaleError : ConfigError {
  explicit NonPositiveScaleError(const std::string& what) : ConfigError("non-positive scale: " + what) {}
};

// Smoothing / object errors
struct TooShortError : DataError {
  explicit TooShortError(const std::string& what) : DataError("too short: " + what) {}
};

struct EmptyObjectError : DataError {
  explicit EmptyObjectError(const std::string& what) : DataError("empty object: " + what) {}
};

// Evaluation errors
struct NoMatchesError : DataError {
  explicit NoMatchesError(const std::string& what) : DataError("no matches: " + what) {}
};

struct DegenerateConfigurationError : DataError {
  explicit DegenerateConfigurationError(const std::string& what)
      : DataError("degenerate configuration: " + what) {}
};

struct EmptyCloudError : DataError {
  explicit EmptyCloudError(const std::string& what) : DataError("empty cloud: " + what) {}
};

// Persistence errors
struct CorruptCheckpointError : DataError {
  explicit CorruptCheckpointError(const std::string& what) : DataError("corrupt checkpoint: " + what) {}
};

struct ConfigHashMismatchError : ConfigError {
  explicit ConfigHashMismatchError(const std::string& what)
      : ConfigError("config hash mismatch: " + what) {}
};

}  // namespace scenemap
