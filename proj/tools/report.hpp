#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace pimc::cli {

using Json = nlohmann::ordered_json;

/// One command result: scalar summary fields plus a table.
struct Report {
  std::string command;
  Json summary = Json::object();
  std::vector<std::string> columns;
  std::vector<Json> rows;  // objects keyed by column name
  bool passed = true;      // false makes the command exit with status 1
};

/// "table": aligned text, "json": a single JSON object on one line,
/// "csv": summary as '# key=value' comments, then header and rows.
std::string render(const Report& report, const std::string& format);

}  // namespace pimc::cli
