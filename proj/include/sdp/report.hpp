// Table and JSON emission for experiment results.
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace sdp {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TableFormat { csv, json };

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

/// Shortest decimal text that parses back to exactly `value`.
std::string format_number(double value);

std::string to_csv(const Table& table);
nlohmann::json to_json(const Table& table);

/// Parses CSV written by to_csv: header row, ',' separators, no quoting.
/// Numeric cells come back as double, anything else as string.
Table parse_csv(std::string_view text);

/// Writes `<dir>/<stem>.csv` or `<dir>/<stem>.json`; returns the path.
std::filesystem::path write_table(const Table& table, const std::filesystem::path& dir,
                                  std::string_view stem, TableFormat format);

void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
void write_text(std::string_view text, const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

}  // namespace sdp
