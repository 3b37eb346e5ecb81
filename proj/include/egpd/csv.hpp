#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace egpd {

/// Minimal CSV emitter; doubles use the shortest round-trip representation.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& names);
  CsvWriter& field(double v);
  CsvWriter& field(std::int64_t v);
  CsvWriter& field(const std::string& v);
  void end_row();

 private:
  void separator();
  std::ostream& out_;
  bool first_ = true;
};

std::string format_double(double v);

/// Checks a written CSV: same column count on every row and a
/// nondecreasing first column. Returns a message on failure.
std::optional<std::string> check_csv(std::istream& in);

}  // namespace egpd
