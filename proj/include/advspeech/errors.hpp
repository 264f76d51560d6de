#pragma once

#include <stdexcept>
#include <string>

namespace advspeech {

// Invalid configuration or contract violation (bad shapes, bad parameters,
// inconsistent manifests). Maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file contents (WAV headers, checkpoints, manifests). Maps to CLI
// exit code 4 together with IoError.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures: missing paths, unreadable or unwritable files.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required (diverged training,
// NaN gradients).
struct NumericsError : std::runtime_error {
  explicit NumericsError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally impossible request, e.g. a CTC target longer than the frame
// budget allows. Attacks treat this as a failed candidate, not a crash.
struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace advspeech
