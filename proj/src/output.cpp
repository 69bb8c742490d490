#include "epflow/output.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace epflow::io {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void CsvTable::add_row(const std::vector<double>& values) {
  if (values.size() != columns_.size()) {
    throw std::invalid_argument("csv row has " + std::to_string(values.size()) + " values, header has " +
                                std::to_string(columns_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) body_ += ',';
    body_ += format_double(values[i]);
  }
  body_ += '\n';
  ++rows_;
}

std::string CsvTable::str() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i > 0) out += ',';
    out += columns_[i];
  }
  out += '\n';
  return out + body_;
}

void write_atomic(const std::filesystem::path& path, const std::string& content, const CommitHook& hook) {
  const std::filesystem::path tmp = path.string() + ".partial";
  try {
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
      f.write(content.data(), static_cast<std::streamsize>(content.size()));
      f.flush();
      if (!f) throw std::runtime_error("write failed: " + tmp.string());
    }
    if (hook) hook(path);
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

OutputSet::OutputSet(std::filesystem::path directory, CommitHook hook)
    : dir_(std::move(directory)), hook_(std::move(hook)) {
  std::filesystem::create_directories(dir_);
}

void OutputSet::write(const std::string& name, const std::string& content) {
  if (std::find(files_.begin(), files_.end(), name) != files_.end()) {
    throw std::logic_error("output file written twice: " + name);
  }
  write_atomic(dir_ / name, content, hook_);
  files_.push_back(name);
  sizes_.push_back(content.size());
}

}  // namespace epflow::io
