#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace hlob::report {

/// A table whose header does not match the expected columns.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& file, std::vector<std::string> missing, std::vector<std::string> unexpected);

  const std::vector<std::string>& missing() const { return missing_; }
  const std::vector<std::string>& unexpected() const { return unexpected_; }

 private:
  std::vector<std::string> missing_;
  std::vector<std::string> unexpected_;
};

/// A parsed tab-separated table; every row has one cell per column.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name`, or throws SchemaError naming the column as missing.
  std::size_t column(const std::string& name) const;
};

Table read_tsv(const std::filesystem::path& path);

struct ReportResult {
  bool nothing_to_report = false;
  /// Files written, in write order.
  std::vector<std::filesystem::path> files;
};

/// Renders report.md and SVG plots from the tables in `from` into `out`.
/// A pure function of the directory contents: identical inputs give
/// byte-identical outputs.
ReportResult render_report(const std::filesystem::path& from, const std::filesystem::path& out);

}  // namespace hlob::report
