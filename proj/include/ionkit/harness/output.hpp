#pragma once

#include <string>
#include <vector>

namespace ionkit::harness {

inline constexpr const char* kVersion = "0.1.0";

/// 17 significant digits; enough to round-trip any double.
std::string format_csv_number(double value);

/// Rows are collected in memory and written in one piece by `write`.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add(const std::vector<double>& row);
  void add_text(std::vector<std::string> row);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes to `path.tmp` then renames, so readers never see a partial file.
void write_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

std::string sha256_hex(const std::string& data);

/// UTC, ISO 8601 with milliseconds.
std::string utc_timestamp();

struct CommandRecord {
  std::string command;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;  // file names relative to the output directory
  int rows_total = 0;
  int rows_valid = 0;
  unsigned long long seed = 0;
  int jobs = 0;
};

/// Adds (or replaces) the record for `record.command` in `<dir>/manifest`.
/// The manifest carries the hash of `<dir>/config.cfg`; call this after every
/// listed output is complete.
void update_manifest(const std::string& dir, const std::string& config_text, const CommandRecord& record);

}  // namespace ionkit::harness
