#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace mmscope {

constexpr const char* kToolVersion = "1.0.0";

enum class ReportFormat { Csv, JsonLines, Json };

ReportFormat report_format_from(const std::string& s);  // UnsupportedFormat

// Round-trip safe float formatting, 17 significant digits.
std::string format_double(double v);

// Deterministic CSV: '#'-prefixed metadata lines, then header, then rows.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void set_meta(const std::string& key, const std::string& value);
  void set_meta(const std::string& key, double value);

  void add_row(std::vector<std::string> cells);
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::vector<std::string>> rows_;
};

// Common metadata block embedded in JSON reports.
nlohmann::ordered_json make_meta();

void write_json(const nlohmann::ordered_json& j,
                const std::filesystem::path& path);

void write_text(const std::string& content,
                const std::filesystem::path& path);

}  // namespace mmscope
