#include "mcuq/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace mcuq::csv {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, std::size_t line) {
  const std::string f = trim(field);
  double value = 0.0;
  const char* first = f.data();
  const char* last = f.data() + f.size();
  if (!f.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (f.empty() || ec != std::errc() || ptr != last)
    throw ParseError("cannot parse number '" + f + "'", line);
  if (!std::isfinite(value)) throw ParseError("non-finite value '" + f + "'", line);
  return value;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

Table read_table(std::istream& in, const std::vector<std::string>& expected_header) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  ++line_no;
  for (const std::string& h : split(line)) t.header.push_back(trim(h));
  if (t.header != expected_header) {
    std::string want;
    for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
    throw ParseError("expected header '" + want + "'", line_no);
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != expected_header.size())
      throw ParseError("expected " + std::to_string(expected_header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_number(f, line_no));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table read_table(const std::filesystem::path& path, const std::vector<std::string>& expected_header) {
  auto in = open(path);
  return read_table(in, expected_header);
}

std::vector<Observation> read_triplets(std::istream& in) {
  const Table t = read_table(in, {"i", "j", "value"});
  std::vector<Observation> out;
  out.reserve(t.rows.size());
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    for (int c = 0; c < 2; ++c) {
      if (row[c] < 0 || row[c] != std::floor(row[c]))
        throw ParseError("index must be a non-negative integer", k + 2);
    }
    out.push_back({static_cast<Index>(row[0]), static_cast<Index>(row[1]), row[2]});
  }
  return out;
}

std::vector<Observation> read_triplets(const std::filesystem::path& path) {
  auto in = open(path);
  return read_triplets(in);
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out << ',';
    out << fields[k];
  }
  out << '\n';
}

}  // namespace mcuq::csv
