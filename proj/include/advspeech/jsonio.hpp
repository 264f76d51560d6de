#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "advspeech/errors.hpp"

namespace advspeech {

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  return std::string(std::istreambuf_iterator<char>(f),
                     std::istreambuf_iterator<char>());
}

// Write via a temp file + rename so partially written artifacts never appear
// under their final name.
inline void atomic_write_text(const std::string& path,
                              const std::string& body) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + tmp.string());
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) throw IoError("short write: " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline uint64_t fnv1a_bytes(const void* data, size_t len,
                            uint64_t hash = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    hash ^= p[i];
    hash *= 1099511628211ull;
  }
  return hash;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return std::string(buf);
}

inline std::string hash_file(const std::string& path) {
  const std::string body = read_text_file(path);
  return hex64(fnv1a_bytes(body.data(), body.size()));
}

inline std::string hash_text(const std::string& body) {
  return hex64(fnv1a_bytes(body.data(), body.size()));
}

inline std::vector<nlohmann::ordered_json> read_jsonl(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open for reading: " + path);
  std::vector<nlohmann::ordered_json> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(nlohmann::ordered_json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": bad JSON line: " + e.what());
    }
  }
  return rows;
}

inline void write_jsonl(const std::string& path,
                        const std::vector<nlohmann::ordered_json>& rows) {
  std::string body;
  for (const auto& row : rows) {
    body += row.dump();
    body += '\n';
  }
  atomic_write_text(path, body);
}

inline nlohmann::ordered_json read_json_file(const std::string& path) {
  try {
    return nlohmann::ordered_json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad JSON: " + e.what());
  }
}

inline void write_json_file(const std::string& path,
                            const nlohmann::ordered_json& j) {
  atomic_write_text(path, j.dump(2) + "\n");
}

}  // namespace advspeech
