#pragma once

// Headered CSV with 0-based indices, '.' decimals and LF line endings.

#include "mcuq/estimator.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcuq::csv {

/// Malformed input; `line` is 1-based (the header is line 1).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Reads a numeric table whose header must equal `expected_header`.
Table read_table(std::istream& in, const std::vector<std::string>& expected_header);
Table read_table(const std::filesystem::path& path, const std::vector<std::string>& expected_header);

/// `i,j,value` triplets; indices must be non-negative integers.
std::vector<Observation> read_triplets(std::istream& in);
std::vector<Observation> read_triplets(const std::filesystem::path& path);

/// Shortest representation that round-trips exactly.
std::string format_double(double x);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace mcuq::csv
