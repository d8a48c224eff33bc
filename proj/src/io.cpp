#include "simvae/io.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace simvae {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  if (header.empty()) throw std::invalid_argument("csv: empty header");
  add_row(header);
}

void CsvWriter::add_row(std::span<const double> values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  add_row(cells);
}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_)
    throw std::invalid_argument("csv: row has " + std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(columns_));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
}

void CsvWriter::save(const std::filesystem::path& path) const { write_text_file(path, text_); }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace simvae
