#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tabkit/errors.hpp"

namespace tabkit::data {

enum class Dtype { kFloat, kInteger, kText };

struct Column {
  std::string name;
  Dtype dtype = Dtype::kText;
  std::vector<double> numbers;      // used when dtype != kText
  std::vector<std::string> texts;   // used when dtype == kText
  std::vector<std::uint8_t> nulls;  // 1 = missing

  bool is_numeric() const { return dtype != Dtype::kText; }
  // Canonical textual form of a cell ("" for null); numeric cells use the
  // shortest round-trip representation.
  std::string cell_text(std::size_t row) const;
};

// Column-oriented in-memory table; the universal interchange type.
class TableFrame {
 public:
  std::size_t row_count() const { return rows_; }
  std::size_t column_count() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }

  bool has_column(const std::string& name) const;
  const Column& column(const std::string& name) const;  // throws MissingColumn

  void add_numeric_column(const std::string& name, std::vector<double> values,
                          std::vector<std::uint8_t> nulls = {});
  void add_text_column(const std::string& name, std::vector<std::string> values,
                       std::vector<std::uint8_t> nulls = {});

  TableFrame select_rows(const std::vector<std::size_t>& indices) const;

  void write_csv(const std::filesystem::path& path) const;

 private:
  void check_new_column(const std::string& name, std::size_t length);

  std::vector<Column> columns_;
  std::size_t rows_ = 0;
  bool has_columns_ = false;
};

// RFC-4180-style CSV with a header row: comma delimiter, double-quote
// quoting with "" escapes, quoted fields may span lines. Columns whose
// non-empty cells all parse as numbers come back as kFloat/kInteger, the
// rest as kText; empty cells set the null mask.
TableFrame read_csv(const std::filesystem::path& path);

}  // namespace tabkit::data
