#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace microt {

/// Shortest round-trippable decimal form; keeps report files byte-stable
/// across runs.
inline std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// RFC-4180-style writer: UTF-8, LF line endings, comma separated. Fields
/// here are numeric or plain identifiers, so no quoting is needed.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  }

  void row(const std::string& line) { out_ << line << "\n"; }

  template <typename... Fields>
  void fields(const Fields&... fs) {
    bool first = true;
    ((out_ << (first ? "" : ",") << fs, first = false), ...);
    out_ << "\n";
  }

  void comment(const std::string& text) { out_ << "# " << text << "\n"; }

 private:
  std::ofstream out_;
};

}  // namespace microt
