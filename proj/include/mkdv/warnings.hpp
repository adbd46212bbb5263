#pragma once

#include <string>
#include <utility>
#include <vector>

namespace mkdv {

// Non-fatal diagnostics (tail overflow, auto-tightened steps, ...).
// Thread-local so concurrent runs do not interleave.
inline std::vector<std::string>& warning_log() {
  thread_local std::vector<std::string> log;
  return log;
}

inline void warn(std::string msg) { warning_log().push_back(std::move(msg)); }

inline std::vector<std::string> take_warnings() {
  std::vector<std::string> out;
  out.swap(warning_log());
  return out;
}

}  // namespace mkdv
