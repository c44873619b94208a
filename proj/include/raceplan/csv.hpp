#pragma once

#include <string>
#include <vector>

namespace raceplan::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;  // throws ParseError if absent
};

// Reads a ';'-separated numeric table with one header line. Throws ParseError
// naming the line number on any malformed row.
Table read(const std::string& path, char sep = ';');

// Writes with shortest round-trip formatting (std::to_chars), LF endings.
void write(const std::string& path, const Table& table, char sep = ';');

std::string format_double(double v);

}  // namespace raceplan::csv
