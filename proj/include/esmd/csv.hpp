#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace esmd {

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

using CsvCell = std::variant<std::string, double, std::int64_t, std::uint64_t, bool>;

// In-memory CSV with a fixed schema; rows must match the header width.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<CsvCell> row);
  // Lines written before the header, each prefixed by "# ".
  void add_comment(std::string line);

  std::size_t rows() const noexcept { return rows_.size(); }
  std::size_t columns() const noexcept { return header_.size(); }
  const std::vector<std::string>& header() const noexcept { return header_; }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::string> comments_;
  std::vector<std::vector<std::string>> rows_;
};

std::string csv_escape(std::string_view field);

}  // namespace esmd
