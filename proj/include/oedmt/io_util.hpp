#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "oedmt/errors.hpp"

namespace oedmt {

// Shortest round-trip representation; exported artifacts must be
// byte-identical across reruns, so all CSV numbers go through here.
inline std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string format_number(int v) { return std::to_string(v); }
inline std::string format_number(std::int64_t v) { return std::to_string(v); }
inline std::string format_number(std::uint64_t v) { return std::to_string(v); }

class CsvWriter {
public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot open for writing: " + path.string());
  }

  template <typename... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, write_field(fields)), ...);
    out_ << "\n";
  }

private:
  void write_field(const char* s) { out_ << s; }
  void write_field(const std::string& s) { out_ << s; }
  void write_field(std::string_view s) { out_ << s; }
  template <typename T>
  void write_field(const T& v) {
    out_ << format_number(v);
  }

  std::ofstream out_;
};

}  // namespace oedmt
