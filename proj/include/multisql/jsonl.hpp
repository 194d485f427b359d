#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "multisql/sqlite_db.hpp"

namespace multisql {

// Compact single-line dump; invalid UTF-8 (blob cells) is replaced rather
// than thrown on.
std::string dump_line(const nlohmann::json& j);
std::string dump_pretty(const nlohmann::json& j);

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& contents);
std::string read_text(const std::filesystem::path& path);

nlohmann::json cell_to_json(const Cell& cell);
Cell cell_from_json(const nlohmann::json& j);

}  // namespace multisql
