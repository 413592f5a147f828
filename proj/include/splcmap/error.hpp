#ifndef SPLCMAP_ERROR_HPP
#define SPLCMAP_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace splcmap {

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input text. `line` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::string message, std::size_t line)
      : Error(line == 0 ? message
                        : "line " + std::to_string(line) + ": " + message),
        message_(std::move(message)),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }
  /// The message without the line prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::size_t line_;
};

enum class Severity { warning, error };

inline const char* to_string(Severity s) {
  return s == Severity::warning ? "warning" : "error";
}

/// A non-fatal finding attached to a location in the corpus (or to no
/// location, when `path` is empty).
struct Diagnostic {
  Severity severity = Severity::warning;
  std::string path;
  std::size_t line = 0;
  std::string message;

  std::string str() const {
    std::string out = to_string(severity);
    out += ": ";
    if (!path.empty()) {
      out += path;
      if (line != 0) out += ":" + std::to_string(line);
      out += ": ";
    }
    out += message;
    return out;
  }

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
  friend auto operator<=>(const Diagnostic& a, const Diagnostic& b) {
    if (auto c = a.path <=> b.path; c != 0) return c;
    if (auto c = a.line <=> b.line; c != 0) return c;
    if (auto c = a.message <=> b.message; c != 0) return c;
    return a.severity <=> b.severity;
  }
};

using Diagnostics = std::vector<Diagnostic>;

}  // namespace splcmap

#endif
