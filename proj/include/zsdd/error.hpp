#pragma once

#include <stdexcept>
#include <string>

namespace zsdd {

// Bad input: malformed files, violated preconditions, inconsistent shapes.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures (missing file, short read, failed rename).
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void fail(const std::string &what) { throw ValidationError(what); }

inline void require(bool ok, const std::string &what) {
  if (!ok)
    fail(what);
}

} // namespace detail
} // namespace zsdd
