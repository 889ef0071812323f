#pragma once

#include <stdexcept>
#include <string>

namespace varfam {

/// Invalid configuration or usage. The CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while reading or writing data (unreadable corpus, bad model file,
/// malformed families file). The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A similarity query on a zero vector.
class UndefinedSimilarity : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace varfam
