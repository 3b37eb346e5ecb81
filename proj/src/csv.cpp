#include "egpd/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace egpd {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void CsvWriter::header(const std::vector<std::string>& names) {
  for (const auto& n : names) field(n);
  end_row();
}

void CsvWriter::separator() {
  if (!first_) out_ << ',';
  first_ = false;
}

CsvWriter& CsvWriter::field(double v) {
  separator();
  out_ << format_double(v);
  return *this;
}

CsvWriter& CsvWriter::field(std::int64_t v) {
  separator();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::field(const std::string& v) {
  separator();
  out_ << v;
  return *this;
}

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
}

std::optional<std::string> check_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return "empty file";
  auto count = [](const std::string& s) { return 1 + static_cast<std::size_t>(std::count(s.begin(), s.end(), ',')); };
  const std::size_t columns = count(line);
  double last = -INFINITY;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    if (count(line) != columns) {
      return "row " + std::to_string(row) + " has " + std::to_string(count(line)) + " columns, expected " +
             std::to_string(columns);
    }
    const double t = std::stod(line.substr(0, line.find(',')));
    if (t < last) return "first column decreases at row " + std::to_string(row);
    last = t;
  }
  return std::nullopt;
}

}  // namespace egpd
