#include "raceplan/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "raceplan/error.hpp"

namespace raceplan::csv {

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ParseError("csv: missing column '" + name + "'");
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& field, const std::string& path, int line_no) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": cannot parse number '" + field +
                     "'");
  }
  return value;
}

}  // namespace

Table read(const std::string& path, char sep) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);

  Table table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (table.header.empty()) {
      table.header = split(line, sep);
      continue;
    }
    const auto fields = split(line, sep);
    if (fields.size() != table.header.size()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(table.header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_double(f, path, line_no));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw ParseError(path + ": empty file");
  return table;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write(const std::string& path, const Table& table, char sep) {
  std::ofstream out(path, std::ios::binary);  // binary: keep LF on every platform
  if (!out) throw Error("cannot open file for writing: " + path);
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out << sep;
    out << table.header[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << sep;
      out << format_double(row[i]);
    }
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

}  // namespace raceplan::csv
