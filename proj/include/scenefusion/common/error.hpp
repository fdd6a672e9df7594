#pragma once

#include <stdexcept>
#include <string>

namespace scenefusion {

// Bad shapes, out-of-range values, malformed inputs.
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

// A referenced file, sample id or key does not exist.
class NotFound : public std::runtime_error {
 public:
  explicit NotFound(const std::string& what) : std::runtime_error(what) {}
};

// Read/write failures and undecodable files.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

template <typename E = InvalidArgument>
inline void require(bool cond, const std::string& message) {
  if (!cond) throw E(message);
}

}  // namespace scenefusion
