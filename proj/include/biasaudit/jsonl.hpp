#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasaudit/core.hpp"

namespace biasaudit {

// One JSON document per line. Blank lines are skipped; malformed lines raise
// DataError with the offending line number.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

// Deterministic writer: compact dump, '\n' separators, parent directories
// created on demand.
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

void append_jsonl(const std::filesystem::path& path, const nlohmann::json& row);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace biasaudit
