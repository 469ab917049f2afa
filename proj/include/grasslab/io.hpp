#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace grasslab::io {

/// Canonical decimal rendering used in every output file, so identical runs
/// produce byte-identical value columns.
std::string format_double(double v);

/// FNV-1a 64 over raw bytes, rendered as 16 hex digits.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string hex64(std::uint64_t v);
std::string digest_bytes(const void* data, std::size_t size);
std::string digest_string(const std::string& s);
std::string digest_file(const std::string& path);

/// Minimal CSV writer with RFC-style quoting for text cells.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void header(const std::vector<std::string>& cols);
  void row(const std::vector<std::string>& cells);
  static std::string quote(const std::string& cell);

 private:
  std::ofstream out_;
};

/// Append-only JSON-lines log.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path);
  void write(const nlohmann::json& record);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

bool ensure_directory(const std::string& path);
std::string read_file(const std::string& path);

}  // namespace grasslab::io
