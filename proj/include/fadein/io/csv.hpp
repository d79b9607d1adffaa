#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fadein/io/wav.hpp"

namespace fadein::io {

/// Shortest round-trip decimal form; '.' separator regardless of locale.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

/// Header plus rows, comma-separated, LF line endings. Fields are written
/// verbatim; callers keep commas out of ids.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row(header); }

  CsvWriter& field(std::string_view s) {
    if (pending_ > 0) text_ += ',';
    text_ += s;
    ++pending_;
    return *this;
  }
  CsvWriter& field(double v) { return field(format_number(v)); }
  CsvWriter& field(std::size_t v) { return field(std::string_view(std::to_string(v))); }

  void end_row() {
    if (pending_ != columns_) {
      throw Error(ErrorCode::kShape, "CSV row has " + std::to_string(pending_) + " fields, expected " +
                                         std::to_string(columns_));
    }
    text_ += '\n';
    pending_ = 0;
  }

  const std::string& str() const { return text_; }

  void save(const std::filesystem::path& path) const {
    write_bytes(path, std::vector<std::uint8_t>(text_.begin(), text_.end()));
  }

 private:
  void row(const std::vector<std::string>& cells) {
    for (const auto& c : cells) field(c);
    end_row();
  }

  std::size_t columns_;
  std::size_t pending_ = 0;
  std::string text_;
};

}  // namespace fadein::io
