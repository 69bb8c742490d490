#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace epflow::io {

/// 17 significant digits ("%.17g"); parses back to the same double.
std::string format_double(double v);

/// In-memory CSV with a fixed column order.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  /// Throws std::invalid_argument when the row width differs from the header.
  void add_row(const std::vector<double>& values);
  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t rows() const { return rows_; }
  std::string str() const;

 private:
  std::vector<std::string> columns_;
  std::string body_;
  std::size_t rows_ = 0;
};

/// Called with the final path after the temporary file is complete and
/// before it is renamed into place. Throwing from it aborts the write.
using CommitHook = std::function<void(const std::filesystem::path&)>;

/// Write `content` to `path` through `path`.partial and a rename, so the
/// final name only ever holds a complete file. The temporary is removed if
/// anything fails.
void write_atomic(const std::filesystem::path& path, const std::string& content, const CommitHook& hook = {});

/// Collects the files one run writes, relative to its output directory.
class OutputSet {
 public:
  OutputSet(std::filesystem::path directory, CommitHook hook = {});

  const std::filesystem::path& directory() const { return dir_; }
  /// Writes atomically and records `name`; names must be unique per run.
  void write(const std::string& name, const std::string& content);
  const std::vector<std::string>& files() const { return files_; }
  const std::vector<std::uintmax_t>& sizes() const { return sizes_; }

 private:
  std::filesystem::path dir_;
  CommitHook hook_;
  std::vector<std::string> files_;
  std::vector<std::uintmax_t> sizes_;
};

}  // namespace epflow::io
