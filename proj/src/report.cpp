#include "mmscope/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mmscope/errors.hpp"

namespace mmscope {

ReportFormat report_format_from(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json-lines" || s == "ndjson") return ReportFormat::JsonLines;
  if (s == "json") return ReportFormat::Json;
  fail(errc::unsupported_format, "unknown format '" + s + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header)
    : header_(std::move(header)) {}

void CsvWriter::set_meta(const std::string& key, const std::string& value) {
  meta_.emplace_back(key, value);
}

void CsvWriter::set_meta(const std::string& key, double value) {
  meta_.emplace_back(key, format_double(value));
}

void CsvWriter::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) {
    fail(errc::invalid_input, "csv row width mismatch");
  }
  rows_.push_back(std::move(cells));
}

std::string CsvWriter::str() const {
  std::ostringstream os;
  os << "# tool=mmscope version=" << kToolVersion << '\n';
  for (const auto& [k, v] : meta_) os << "# " << k << '=' << v << '\n';
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) os << ',';
    os << header_[i];
  }
  os << '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << row[i];
    }
    os << '\n';
  }
  return os.str();
}

void CsvWriter::write(const std::filesystem::path& path) const {
  write_text(str(), path);
}

nlohmann::ordered_json make_meta() {
  nlohmann::ordered_json meta;
  meta["tool"] = "mmscope";
  meta["version"] = kToolVersion;
  return meta;
}

void write_json(const nlohmann::ordered_json& j,
                const std::filesystem::path& path) {
  write_text(j.dump(2) + "\n", path);
}

void write_text(const std::string& content,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(errc::io_error, "cannot write " + path.string());
  out << content;
  if (!out) fail(errc::io_error, "short write to " + path.string());
}

}  // namespace mmscope
