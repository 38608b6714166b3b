#pragma once

#include <stdexcept>
#include <string>

namespace gapdeck {

// Exit-code families used by the CLI: config (2), data (3), estimation (4).

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gapdeck
