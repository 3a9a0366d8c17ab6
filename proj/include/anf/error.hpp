#pragma once

#include <stdexcept>
#include <string>

namespace anf {

// Invalid configuration values or shapes. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse (stale caches, out-of-range indices).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/inf or divergence detected during a run. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem / serialization failures. Maps to CLI exit code 4.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace anf
