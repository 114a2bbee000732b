#pragma once

#include <stdexcept>
#include <string>

namespace dfuse {

/// Invalid configuration or parameter-domain violation. CLI exit code 1.
class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A statistic whose normalization vanishes under the given scenario
/// (e.g. every reporting link carries zero information). CLI exit code 2.
class degenerate_statistic_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failure while reading configuration or writing artifacts.
/// CLI exit code 3.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dfuse
