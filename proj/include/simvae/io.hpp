#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace simvae {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// Minimal CSV writer: header row, then rows with the same column count.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void add_row(std::span<const double> values);
  void add_row(const std::vector<std::string>& cells);
  std::string str() const { return text_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::string text_;
};

/// Writes text to `path`, replacing any existing file.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace simvae
