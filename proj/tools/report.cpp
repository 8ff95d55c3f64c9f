#include "report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace pimc::cli {

namespace {

std::string cell(const Json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v.get<double>());
    return buf;
  }
  if (v.is_array()) {
    std::string out;
    for (const Json& item : v) out += (out.empty() ? "" : ",") + cell(item);
    return out;
  }
  return v.dump();
}

std::string csv_cell(const Json& v) {
  std::string s = cell(v);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

std::string render_table(const Report& r) {
  std::ostringstream out;
  out << "# " << r.command << "\n";
  for (const auto& [key, value] : r.summary.items()) out << key << ": " << cell(value) << "\n";
  if (r.columns.empty()) return out.str();
  std::vector<std::size_t> width;
  for (const std::string& c : r.columns) width.push_back(c.size());
  std::vector<std::vector<std::string>> cells;
  for (const Json& row : r.rows) {
    std::vector<std::string> line;
    for (std::size_t k = 0; k < r.columns.size(); ++k) {
      line.push_back(cell(row.contains(r.columns[k]) ? row[r.columns[k]] : Json()));
      width[k] = std::max(width[k], line.back().size());
    }
    cells.push_back(std::move(line));
  }
  out << "\n";
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t k = 0; k < line.size(); ++k) {
      out << (k ? "  " : "") << std::string(width[k] - line[k].size(), ' ') << line[k];
    }
    out << "\n";
  };
  emit(r.columns);
  for (const auto& line : cells) emit(line);
  return out.str();
}

std::string render_csv(const Report& r) {
  std::ostringstream out;
  out << "# command=" << r.command << "\n";
  for (const auto& [key, value] : r.summary.items()) out << "# " << key << "=" << cell(value) << "\n";
  for (std::size_t k = 0; k < r.columns.size(); ++k) out << (k ? "," : "") << r.columns[k];
  if (!r.columns.empty()) out << "\n";
  for (const Json& row : r.rows) {
    for (std::size_t k = 0; k < r.columns.size(); ++k) {
      out << (k ? "," : "") << csv_cell(row.contains(r.columns[k]) ? row[r.columns[k]] : Json());
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace

std::string render(const Report& report, const std::string& format) {
  if (format == "table") return render_table(report);
  if (format == "csv") return render_csv(report);
  if (format == "json") {
    Json doc = Json::object();
    doc["command"] = report.command;
    for (const auto& [key, value] : report.summary.items()) doc[key] = value;
    doc["rows"] = report.rows;
    return doc.dump() + "\n";
  }
  throw std::invalid_argument("unknown output format '" + format + "'");
}

}  // namespace pimc::cli
