#include "tabkit/table.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "tabkit/strings.hpp"

namespace tabkit::data {

std::string Column::cell_text(std::size_t row) const {
  if (nulls[row]) return "";
  if (is_numeric()) return format_double(numbers[row]);
  return texts[row];
}

bool TableFrame::has_column(const std::string& name) const {
  for (const Column& c : columns_) {
    if (c.name == name) return true;
  }
  return false;
}

const Column& TableFrame::column(const std::string& name) const {
  for (const Column& c : columns_) {
    if (c.name == name) return c;
  }
  throw MissingColumn(name);
}

void TableFrame::check_new_column(const std::string& name, std::size_t length) {
  if (has_column(name)) {
    throw InvalidValue("column " + name, "already present in frame");
  }
  if (has_columns_ && length != rows_) {
    throw InvalidValue("column " + name,
                       "length " + std::to_string(length) +
                           " does not match row count " +
                           std::to_string(rows_));
  }
}

void TableFrame::add_numeric_column(const std::string& name,
                                    std::vector<double> values,
                                    std::vector<std::uint8_t> nulls) {
  check_new_column(name, values.size());
  Column col;
  col.name = name;
  bool integral = true;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!nulls.empty() && nulls[i]) continue;
    if (values[i] != std::trunc(values[i])) integral = false;
  }
  col.dtype = integral ? Dtype::kInteger : Dtype::kFloat;
  col.numbers = std::move(values);
  col.nulls = nulls.empty() ? std::vector<std::uint8_t>(col.numbers.size(), 0)
                            : std::move(nulls);
  rows_ = col.numbers.size();
  has_columns_ = true;
  columns_.push_back(std::move(col));
}

void TableFrame::add_text_column(const std::string& name,
                                 std::vector<std::string> values,
                                 std::vector<std::uint8_t> nulls) {
  check_new_column(name, values.size());
  Column col;
  col.name = name;
  col.dtype = Dtype::kText;
  col.texts = std::move(values);
  col.nulls = nulls.empty() ? std::vector<std::uint8_t>(col.texts.size(), 0)
                            : std::move(nulls);
  rows_ = col.texts.size();
  has_columns_ = true;
  columns_.push_back(std::move(col));
}

TableFrame TableFrame::select_rows(const std::vector<std::size_t>& indices) const {
  TableFrame out;
  for (const Column& c : columns_) {
    Column sel;
    sel.name = c.name;
    sel.dtype = c.dtype;
    sel.nulls.reserve(indices.size());
    for (std::size_t i : indices) sel.nulls.push_back(c.nulls[i]);
    if (c.is_numeric()) {
      sel.numbers.reserve(indices.size());
      for (std::size_t i : indices) sel.numbers.push_back(c.numbers[i]);
    } else {
      sel.texts.reserve(indices.size());
      for (std::size_t i : indices) sel.texts.push_back(c.texts[i]);
    }
    out.columns_.push_back(std::move(sel));
  }
  out.rows_ = indices.size();
  out.has_columns_ = has_columns_;
  return out;
}

namespace {

std::string quote_csv_field(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

void TableFrame::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError(path.string());
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (c) out << ',';
    out << quote_csv_field(columns_[c].name);
  }
  out << '\n';
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (c) out << ',';
      out << quote_csv_field(columns_[c].cell_text(r));
    }
    out << '\n';
  }
  if (!out) throw IoError(path.string());
}

namespace {

struct RawCsv {
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> start_lines;
};

RawCsv parse_csv_text(const std::string& text) {
  RawCsv raw;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool record_started = false;
  std::size_t line = 1, record_line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
  };
  auto end_record = [&] {
    end_field();
    raw.records.push_back(std::move(record));
    raw.start_lines.push_back(record_line);
    record.clear();
    record_started = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (!record_started) {
      record_started = true;
      record_line = line;
    }
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      // swallow; the \n (if any) ends the record
    } else if (c == '\n') {
      ++line;
      end_record();
    } else {
      field += c;
    }
  }
  if (record_started || !field.empty() || !record.empty()) end_record();
  return raw;
}

}  // namespace

TableFrame read_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileNotFound(path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  RawCsv raw = parse_csv_text(text);
  if (raw.records.empty()) throw EmptyFile(path.string());

  const std::vector<std::string>& header = raw.records.front();
  std::set<std::string> unique_names(header.begin(), header.end());
  if (unique_names.size() != header.size()) {
    throw InvalidValue("csv header", "duplicate column names");
  }
  const std::size_t ncols = header.size();
  const std::size_t nrows = raw.records.size() - 1;

  for (std::size_t r = 1; r < raw.records.size(); ++r) {
    if (raw.records[r].size() != ncols) throw RaggedRow(raw.start_lines[r]);
  }

  TableFrame frame;
  for (std::size_t c = 0; c < ncols; ++c) {
    std::vector<std::uint8_t> nulls(nrows, 0);
    std::vector<double> numbers(nrows, 0.0);
    bool numeric = true;
    bool any_value = false;
    for (std::size_t r = 0; r < nrows; ++r) {
      const std::string& cell = raw.records[r + 1][c];
      if (cell.empty()) {
        nulls[r] = 1;
        continue;
      }
      any_value = true;
      if (numeric) {
        if (auto v = parse_double(cell)) {
          numbers[r] = *v;
        } else {
          numeric = false;
        }
      }
    }
    if (numeric && any_value) {
      frame.add_numeric_column(header[c], std::move(numbers), std::move(nulls));
    } else {
      std::vector<std::string> texts(nrows);
      for (std::size_t r = 0; r < nrows; ++r) {
        texts[r] = raw.records[r + 1][c];
      }
      frame.add_text_column(header[c], std::move(texts), std::move(nulls));
    }
  }
  return frame;
}

}  // namespace tabkit::data
