#pragma once

#include <stdexcept>
#include <string>

namespace trisim {

// Malformed or inconsistent input data (files, matrices, judgments).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values: out-of-range hyperparameters and the like.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A remote endpoint could not be reached or refused the request.
class RemoteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace trisim
