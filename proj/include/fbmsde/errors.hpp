#pragma once

#include <stdexcept>
#include <string>

namespace fbmsde {

// Error taxonomy mirrored by the CLI exit codes:
// config errors -> 1, numerical errors -> 2, resource errors -> 3.
// Messages are prefixed "<module>.<operation>: ..." so failures are traceable.

struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct resource_error : std::runtime_error {
  explicit resource_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Coefficient functions violating model hypotheses (sigma <= 0, b <= 0, ...).
struct model_error : std::runtime_error {
  explicit model_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fbmsde
