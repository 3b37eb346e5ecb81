#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "egpd/model.hpp"

namespace egpd {

/// Malformed scenario text. line is 1-based, 0 when unknown.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& message, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line(line) {}
  int line;
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

/// YAML text that parse_scenario reads back to an equivalent scenario.
/// Callable utilities other than the built-in families cannot be saved.
std::string dump_scenario(const Scenario& s);

}  // namespace egpd
