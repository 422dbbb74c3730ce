#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dkse {

// Contract failure: thrown on violated preconditions, malformed input, and
// non-finite numerics. The CLI turns these into one-line diagnostics.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void check(bool ok, const std::string& msg) {
  if (!ok) throw Error(msg);
}

// Reads a whole file; throws on failure.
std::string read_file(const std::string& path);

// Writes via a temp file in the same directory plus an atomic rename, so a
// crash never leaves a partial file behind.
void write_file_atomic(const std::string& path, const std::string& content);

// Formats a double so that parsing it back yields the identical value.
std::string format_double(double v);

}  // namespace dkse
