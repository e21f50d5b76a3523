#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phishaudit {

inline constexpr int kPhishing = 1;
inline constexpr int kBenign = 0;

// Rectangular labeled dataset: n rows x m named numeric columns plus a binary
// label per row (1 = phishing). Missing cells are NaN. Immutable by
// convention; every transform returns a new table.
class DataTable {
 public:
  DataTable() = default;
  // Throws Error(kInvalidArgument) if the shape is not rectangular or a label
  // is outside {0, 1}; Error(kDuplicateColumnName) on repeated names.
  DataTable(std::string name, std::vector<std::string> column_names,
            std::vector<double> values, std::vector<int> labels);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& column_names() const { return columns_; }
  std::size_t n_rows() const { return labels_.size(); }
  std::size_t n_cols() const { return columns_.size(); }

  double value(std::size_t row, std::size_t col) const {
    return values_[row * columns_.size() + col];
  }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * columns_.size(), columns_.size()};
  }
  std::span<const double> values() const { return values_; }
  std::span<const int> labels() const { return labels_; }
  int label(std::size_t i) const { return labels_[i]; }

  std::vector<double> column(std::size_t col) const;
  std::optional<std::size_t> column_index(std::string_view name) const;
  std::size_t count_label(int label) const;
  bool has_missing() const;

  DataTable select_rows(std::span<const std::size_t> rows) const;
  DataTable select_columns(const std::vector<std::string>& names) const;
  DataTable renamed(std::string name) const;

  // Row-wise concatenation; column names must match exactly.
  static DataTable concat(const DataTable& a, const DataTable& b,
                          std::string name);

  // Writes the feature columns followed by the label column. Labels are
  // written as the given texts; NaN cells are written empty.
  void write_csv(const std::string& path,
                 const std::string& label_column = "label",
                 const std::string& positive_text = "1",
                 const std::string& negative_text = "0") const;

 private:
  std::string name_;
  std::vector<std::string> columns_;
  std::vector<double> values_;
  std::vector<int> labels_;
};

struct LoadOptions {
  std::string label_column = "label";
  std::string positive_label = "1";
  std::string name;
  // Columns with no numeric cell but some non-empty text (e.g. the raw URL)
  // are removed instead of becoming all-missing.
  bool drop_text_columns = true;
  std::vector<std::string> drop_columns;
};

// Reads a headered CSV. Unparseable cells, empty cells and "NaN" become
// missing. The label column is removed from the features and binarised:
// 1 iff the trimmed cell equals positive_label (textually or numerically).
DataTable load_csv(const std::string& path, const LoadOptions& options,
                   std::vector<std::string>* dropped_text_columns = nullptr);

}  // namespace phishaudit
