#include "phishaudit/data_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_map>

#include "phishaudit/csv.hpp"
#include "phishaudit/error.hpp"

namespace phishaudit {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::optional<double> parse_number(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || std::isnan(value)) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

DataTable::DataTable(std::string name, std::vector<std::string> column_names,
                     std::vector<double> values, std::vector<int> labels)
    : name_(std::move(name)),
      columns_(std::move(column_names)),
      values_(std::move(values)),
      labels_(std::move(labels)) {
  if (values_.size() != labels_.size() * columns_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "table " + name_ + " is not rectangular");
  }
  std::set<std::string_view> seen;
  for (const auto& c : columns_) {
    if (!seen.insert(c).second) {
      throw Error(ErrorCode::kDuplicateColumnName, c);
    }
  }
  for (const int y : labels_) {
    if (y != 0 && y != 1) {
      throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    }
  }
}

std::vector<double> DataTable::column(std::size_t col) const {
  std::vector<double> out(n_rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(i, col);
  return out;
}

std::optional<std::size_t> DataTable::column_index(std::string_view name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j] == name) return j;
  }
  return std::nullopt;
}

std::size_t DataTable::count_label(int label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

bool DataTable::has_missing() const {
  return std::any_of(values_.begin(), values_.end(),
                     [](double v) { return std::isnan(v); });
}

DataTable DataTable::select_rows(std::span<const std::size_t> rows) const {
  const std::size_t m = n_cols();
  std::vector<double> values;
  values.reserve(rows.size() * m);
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (const std::size_t r : rows) {
    if (r >= n_rows()) throw Error(ErrorCode::kInvalidArgument, "row index out of range");
    const auto src = row(r);
    values.insert(values.end(), src.begin(), src.end());
    labels.push_back(labels_[r]);
  }
  return DataTable(name_, columns_, std::move(values), std::move(labels));
}

DataTable DataTable::select_columns(const std::vector<std::string>& names) const {
  std::vector<std::size_t> index;
  index.reserve(names.size());
  for (const auto& n : names) {
    const auto j = column_index(n);
    if (!j) throw Error(ErrorCode::kSchemaMismatch, "no column " + n + " in " + name_);
    index.push_back(*j);
  }
  std::vector<double> values;
  values.reserve(n_rows() * names.size());
  for (std::size_t i = 0; i < n_rows(); ++i) {
    for (const std::size_t j : index) values.push_back(value(i, j));
  }
  return DataTable(name_, names, std::move(values), labels_);
}

DataTable DataTable::renamed(std::string name) const {
  DataTable copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

DataTable DataTable::concat(const DataTable& a, const DataTable& b, std::string name) {
  if (a.columns_ != b.columns_) {
    throw Error(ErrorCode::kSchemaMismatch,
                "cannot concatenate " + a.name_ + " and " + b.name_);
  }
  std::vector<double> values = a.values_;
  values.insert(values.end(), b.values_.begin(), b.values_.end());
  std::vector<int> labels = a.labels_;
  labels.insert(labels.end(), b.labels_.begin(), b.labels_.end());
  return DataTable(std::move(name), a.columns_, std::move(values), std::move(labels));
}

void DataTable::write_csv(const std::string& path, const std::string& label_column,
                          const std::string& positive_text,
                          const std::string& negative_text) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  csv::Record header = columns_;
  header.push_back(label_column);
  csv::write_record(out, header);
  csv::Record record(n_cols() + 1);
  for (std::size_t i = 0; i < n_rows(); ++i) {
    for (std::size_t j = 0; j < n_cols(); ++j) {
      const double v = value(i, j);
      record[j] = std::isnan(v) ? std::string() : csv::format_double(v);
    }
    record.back() = labels_[i] == kPhishing ? positive_text : negative_text;
    csv::write_record(out, record);
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

DataTable load_csv(const std::string& path, const LoadOptions& options,
                   std::vector<std::string>* dropped_text_columns) {
  const auto records = csv::read_file(path);
  if (records.empty()) throw Error(ErrorCode::kEmptyFile, path);
  const csv::Record& header = records.front();

  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name(trim(header[j]));
    if (!seen.emplace(name, j).second) {
      throw Error(ErrorCode::kDuplicateColumnName, path + ": " + name);
    }
  }
  const auto label_it = seen.find(options.label_column);
  if (label_it == seen.end()) {
    throw Error(ErrorCode::kMissingLabelColumn,
                path + ": no column '" + options.label_column + "'");
  }
  const std::size_t label_col = label_it->second;
  const std::set<std::string> explicit_drop(options.drop_columns.begin(),
                                            options.drop_columns.end());
  const auto positive_numeric = parse_number(options.positive_label);
  const std::size_t n = records.size() - 1;

  // Parse every feature column, then decide which to keep.
  std::vector<std::size_t> feature_cols;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != label_col && !explicit_drop.contains(std::string(trim(header[j])))) {
      feature_cols.push_back(j);
    }
  }
  std::vector<std::vector<double>> parsed(feature_cols.size(), std::vector<double>(n));
  std::vector<bool> any_numeric(feature_cols.size(), false);
  std::vector<bool> any_text(feature_cols.size(), false);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const csv::Record& r = records[i + 1];
    if (r.size() != header.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  path + ": line " + std::to_string(i + 2) + " has " +
                      std::to_string(r.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    const std::string_view label_cell = trim(r[label_col]);
    bool positive = label_cell == options.positive_label;
    if (!positive && positive_numeric) {
      const auto v = parse_number(label_cell);
      positive = v && *v == *positive_numeric;
    }
    labels[i] = positive ? kPhishing : kBenign;
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const std::string_view cell = trim(r[feature_cols[k]]);
      const auto v = parse_number(cell);
      parsed[k][i] = v ? *v : kNaN;
      if (v) {
        any_numeric[k] = true;
      } else if (!cell.empty() && cell != "NaN" && cell != "nan") {
        any_text[k] = true;
      }
    }
  }

  std::vector<std::string> columns;
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < feature_cols.size(); ++k) {
    const std::string name(trim(header[feature_cols[k]]));
    if (options.drop_text_columns && !any_numeric[k] && any_text[k]) {
      if (dropped_text_columns) dropped_text_columns->push_back(name);
      continue;
    }
    columns.push_back(name);
    keep.push_back(k);
  }
  std::vector<double> values;
  values.reserve(n * keep.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (const std::size_t k : keep) values.push_back(parsed[k][i]);
  }
  return DataTable(options.name.empty() ? path : options.name, std::move(columns),
                   std::move(values), std::move(labels));
}

}  // namespace phishaudit
