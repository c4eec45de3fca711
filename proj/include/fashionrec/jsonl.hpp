#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace fashionrec {

using Json = nlohmann::json;

// Calls fn(object, line_number) for every non-blank line. Throws ParseError
// naming the line on malformed JSON or a non-object line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t)>& fn);

std::vector<Json> read_jsonl(const std::filesystem::path& path);

// Compact single-line dumps, '\n' terminated. Creates parent directories.
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);

void write_json(const std::filesystem::path& path, const Json& value);
Json read_json(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

}  // namespace fashionrec
