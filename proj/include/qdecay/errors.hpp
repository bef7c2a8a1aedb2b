#pragma once

#include <stdexcept>
#include <string>

namespace qdecay {

// Invalid model input or domain violation. The CLI maps these to exit code 2.
class model_error : public std::domain_error {
 public:
  explicit model_error(const std::string& msg) : std::domain_error(msg) {}
};

// Numerical failure: non-convergence, degeneracy, singular systems. Exit code 3.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed configuration or input file. Exit code 2.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qdecay
