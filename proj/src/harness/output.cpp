#include "ionkit/harness/output.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

#include "json.hpp"

namespace ionkit::harness {

namespace fs = std::filesystem;

std::string format_csv_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add(const std::vector<double>& row) {
  std::vector<std::string> text;
  text.reserve(row.size());
  for (double v : row) text.push_back(format_csv_number(v));
  add_text(std::move(text));
}

void CsvTable::add_text(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw std::logic_error("csv: row width does not match the header");
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void CsvTable::write(const std::string& path) const { write_atomic(path, str()); }

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string utc_timestamp() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const std::time_t t = system_clock::to_time_t(now);
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char full[48];
  std::snprintf(full, sizeof full, "%s.%03dZ", buf, static_cast<int>(ms));
  return full;
}

void update_manifest(const std::string& dir, const std::string& config_text, const CommandRecord& record) {
  using nlohmann::json;
  const std::string path = (fs::path(dir) / "manifest").string();
  const std::string hash = sha256_hex(config_text);
  json doc;
  if (fs::exists(path)) {
    try {
      doc = json::parse(read_file(path));
    } catch (const json::exception&) {
      doc = json::object();
    }
    // A different config invalidates earlier records.
    if (!doc.contains("config_sha256") || doc["config_sha256"] != hash) doc = json::object();
  }
  doc["toolkit"] = "ionkit";
  doc["version"] = kVersion;
  doc["config"] = "config.cfg";
  doc["config_sha256"] = hash;
  if (!doc.contains("commands")) doc["commands"] = json::array();

  json entry{{"command", record.command},
             {"started", record.started},
             {"finished", record.finished},
             {"outputs", record.outputs},
             {"rows_total", record.rows_total},
             {"rows_valid", record.rows_valid},
             {"seed", record.seed},
             {"jobs", record.jobs}};
  auto& commands = doc["commands"];
  bool replaced = false;
  for (auto& c : commands)
    if (c["command"] == record.command) {
      c = entry;
      replaced = true;
    }
  if (!replaced) commands.push_back(entry);
  write_atomic(path, doc.dump(2) + "\n");
}

}  // namespace ionkit::harness
