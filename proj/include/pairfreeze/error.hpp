#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace pairfreeze {

// Structured runtime error. `kind` lets callers (CLI, tests) distinguish
// shape/argument misuse from IO and parse failures without string matching.
class Error : public std::runtime_error {
 public:
  enum class Kind { shape, argument, state, io, parse };

  Error(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <typename Arg, typename... Rest>
void format_into(std::ostringstream& os, const Arg& arg, const Rest&... rest) {
  os << arg;
  format_into(os, rest...);
}
}  // namespace detail

template <typename... Args>
[[noreturn]] void fail(Error::Kind kind, const Args&... args) {
  std::ostringstream os;
  detail::format_into(os, args...);
  throw Error(kind, os.str());
}

}  // namespace pairfreeze
