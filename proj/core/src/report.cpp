// SPDX-License-Identifier: Apache-2.0
#include "spitfilter/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "spitfilter/engine.hpp"
#include "spitfilter/error.hpp"

namespace spitfilter {

namespace {

std::string cell_text(const Cell& cell) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "";
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(v);
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(v);
        } else {
          return v;
        }
      },
      cell);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

nlohmann::ordered_json table_json(const Table& table) {
  nlohmann::ordered_json doc;
  doc["table"] = table.name;
  doc["caption"] = table.caption;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : table.meta) meta[k] = v;
  doc["meta"] = std::move(meta);
  doc["columns"] = table.columns;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json obj;
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
              obj[table.columns[i]] = nullptr;
            } else {
              obj[table.columns[i]] = v;
            }
          },
          row[i]);
    }
    rows.push_back(std::move(obj));
  }
  doc["rows"] = std::move(rows);
  return doc;
}

}  // namespace

std::size_t Table::column_index(const std::string& column) const {
  const auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) throw InputError("table '" + name + "' has no column '" + column + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

const Cell& Table::at(std::size_t row, const std::string& column) const {
  return rows.at(row).at(column_index(column));
}

double Table::number(std::size_t row, const std::string& column) const {
  const Cell& c = at(row, column);
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  return std::nan("");
}

std::string to_csv(const Table& table) {
  std::ostringstream out;
  for (const auto& [k, v] : table.meta) out << "# " << k << '=' << v << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    out << (i ? "," : "") << csv_escape(table.columns[i]);
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_escape(cell_text(row[i]));
    out << '\n';
  }
  return out.str();
}

std::string to_json(const Table& table) { return table_json(table).dump(2); }

std::string to_json(const std::vector<Table>& tables) {
  auto docs = nlohmann::ordered_json::array();
  for (const auto& t : tables) docs.push_back(table_json(t));
  return docs.dump(2);
}

std::string to_text(const Table& table) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back(table.columns);
  for (const auto& row : table.rows) {
    std::vector<std::string> line;
    for (const auto& c : row) {
      if (const auto* d = std::get_if<double>(&c)) {
        std::ostringstream s;
        s.precision(6);
        s << *d;
        line.push_back(s.str());
      } else {
        line.push_back(cell_text(c));
      }
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(table.columns.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size() && i < width.size(); ++i) {
      width[i] = std::max(width[i], line[i].size());
    }
  }
  std::ostringstream out;
  out << table.name;
  if (!table.caption.empty()) out << " - " << table.caption;
  out << '\n';
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      out << (i ? "  " : "") << std::string(width[i] - cells[r][i].size(), ' ') << cells[r][i];
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace spitfilter
