#pragma once

#include <stdexcept>
#include <string>

namespace spoofprint {

/// Input that violates a documented contract: malformed manifest rows,
/// unknown attack ids, single-class score sets, bad parameters.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failures (missing files, unwritable outputs).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spoofprint
