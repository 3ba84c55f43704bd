// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace spitfilter {

using Cell = std::variant<std::monostate, double, std::int64_t, std::string>;

/// A named table with ordered columns; emitted as CSV, as a self-describing
/// JSON document, or as aligned text for terminals.
struct Table {
  std::string name;
  std::string caption;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::pair<std::string, std::string>> meta;

  std::size_t column_index(const std::string& column) const;
  const Cell& at(std::size_t row, const std::string& column) const;
  double number(std::size_t row, const std::string& column) const;
};

std::string to_csv(const Table& table);
std::string to_json(const Table& table);
std::string to_json(const std::vector<Table>& tables);
std::string to_text(const Table& table);

}  // namespace spitfilter
