#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace jcas {

/// Invalid configuration or parameters. Carries every problem found.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(std::vector<std::string> issues)
    : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

  explicit ConfigError(const std::string& issue)
    : ConfigError(std::vector<std::string>{issue}) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out;
    for (const auto& s : issues) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

/// A quadrature or an infinite product failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Reading or writing a file failed.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace jcas
