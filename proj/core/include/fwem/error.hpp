#pragma once

#include <stdexcept>
#include <string>

namespace fwem {

/// Library error carrying a short machine-readable code ("bad_grid",
/// "outside_interior", ...) next to the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  [[nodiscard]] const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace fwem
