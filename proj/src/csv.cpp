#include "esmd/csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "esmd/errors.hpp"

namespace esmd {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw InvalidArgument("CsvTable: empty header");
}

void CsvTable::add_row(std::vector<CsvCell> row) {
  if (row.size() != header_.size())
    throw InvalidArgument("CsvTable: row has " + std::to_string(row.size()) + " cells, header has " +
                          std::to_string(header_.size()));
  std::vector<std::string> text;
  text.reserve(row.size());
  for (const CsvCell& cell : row) {
    text.push_back(std::visit(
        [](const auto& v) -> std::string {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::string>) return csv_escape(v);
          else if constexpr (std::is_same_v<T, double>) return format_double(v);
          else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
          else return std::to_string(v);
        },
        cell));
  }
  rows_.push_back(std::move(text));
}

void CsvTable::add_comment(std::string line) { comments_.push_back(std::move(line)); }

std::string CsvTable::str() const {
  std::ostringstream out;
  for (const auto& c : comments_) out << "# " << c << '\n';
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  std::vector<std::string> head;
  for (const auto& h : header_) head.push_back(csv_escape(h));
  line(head);
  for (const auto& r : rows_) line(r);
  return out.str();
}

}  // namespace esmd
