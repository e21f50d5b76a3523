#include "phishaudit/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "phishaudit/error.hpp"
#include "phishaudit/rng.hpp"
#include "phishaudit/url_features.hpp"

namespace phishaudit {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("phishaudit_" + name);
  std::ofstream(path) << content;
  return path.string();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

DataTable one_column(std::vector<double> v, std::vector<int> labels) {
  return DataTable("t", {"x"}, std::move(v), std::move(labels));
}

TEST(LoadCsv, BinarisesTextLabels) {
  const auto path = write_temp("labels.csv", "a,status\n1,phishing\n2,benign\n3,phishing\n");
  const DataTable t = load_csv(path, {.label_column = "status", .positive_label = "phishing"});
  EXPECT_EQ(std::vector<int>(t.labels().begin(), t.labels().end()),
            (std::vector<int>{1, 0, 1}));
  EXPECT_EQ(t.n_cols(), 1u);
}

TEST(LoadCsv, NanAndEmptyCellsAreMissing) {
  const auto path = write_temp("nan.csv", "a,b,label\nNaN,1,1\n,2,0\n3.5,x,0\n");
  const DataTable t = load_csv(path, {});
  EXPECT_TRUE(std::isnan(t.value(0, 0)));
  EXPECT_TRUE(std::isnan(t.value(1, 0)));
  EXPECT_EQ(t.value(2, 0), 3.5);
  EXPECT_TRUE(std::isnan(t.value(2, 1)));
}

TEST(LoadCsv, Errors) {
  EXPECT_EQ(code_of([] { load_csv(write_temp("dup.csv", "x,x,label\n1,2,0\n"), {}); }),
            ErrorCode::kDuplicateColumnName);
  EXPECT_EQ(code_of([] { load_csv(write_temp("nolabel.csv", "x,y\n1,2\n"), {}); }),
            ErrorCode::kMissingLabelColumn);
  EXPECT_EQ(code_of([] { load_csv(write_temp("empty.csv", ""), {}); }),
            ErrorCode::kEmptyFile);
}

TEST(LoadCsv, DropsTextColumns) {
  const auto path = write_temp("text.csv", "url,a,label\nhttp://x,1,1\nhttp://y,2,0\n");
  std::vector<std::string> dropped;
  const DataTable t = load_csv(path, {}, &dropped);
  EXPECT_EQ(t.column_names(), std::vector<std::string>{"a"});
  EXPECT_EQ(dropped, std::vector<std::string>{"url"});
}

SchemaMapping tiny_mapping() {
  SchemaMapping m;
  for (const auto& name : FeatureSchema::common().names()) {
    m.entries.push_back({name, "d2_" + name, name, std::nullopt});
  }
  return m;
}

DataTable d2_style_table(std::size_t rows) {
  std::vector<std::string> cols{"extra_a"};
  for (const auto& n : FeatureSchema::common().names()) cols.push_back("d2_" + n);
  std::reverse(cols.begin() + 1, cols.end());
  std::vector<double> v;
  std::vector<int> y;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) v.push_back(static_cast<double>(i * 100 + j));
    y.push_back(static_cast<int>(i % 2));
  }
  return DataTable("D2", cols, v, y);
}

TEST(AlignSchema, RenamesIntoSchemaOrder) {
  const DataTable raw = d2_style_table(4);
  const DataTable t = align_schema(raw, tiny_mapping(), DatasetSide::kD2, FeatureSet::kCommon);
  EXPECT_EQ(t.column_names(), FeatureSchema::common().names());
  EXPECT_EQ(t.n_rows(), raw.n_rows());
  EXPECT_TRUE(std::equal(t.labels().begin(), t.labels().end(), raw.labels().begin()));
  const auto src = *raw.column_index("d2_length_url");
  const auto dst = *t.column_index("length_url");
  for (std::size_t i = 0; i < t.n_rows(); ++i) EXPECT_EQ(t.value(i, dst), raw.value(i, src));
}

TEST(AlignSchema, AllFeaturesKeepsUnmappedColumns) {
  const DataTable raw = d2_style_table(3);
  const DataTable t = align_schema(raw, tiny_mapping(), DatasetSide::kD2, FeatureSet::kAll);
  EXPECT_EQ(t.n_cols(), 21u);
  EXPECT_EQ(t.column_names()[0], "extra_a");
  EXPECT_TRUE(t.column_index("qty_dot_url").has_value());
}

TEST(AlignSchema, MissingSourceNamed) {
  SchemaMapping m = tiny_mapping();
  m.entries[3].d2_name = "no_such_column";
  try {
    align_schema(d2_style_table(2), m, DatasetSide::kD2, FeatureSet::kCommon);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnmappedColumn);
    EXPECT_NE(std::string(e.what()).find("no_such_column"), std::string::npos);
  }
}

TEST(AlignSchema, SentinelBecomesMissing) {
  SchemaMapping m = tiny_mapping();
  m.entries[0].missing_sentinel = 100.0;
  const DataTable t = align_schema(d2_style_table(2), m, DatasetSide::kD2, FeatureSet::kCommon);
  // d2_qty_dot_url is the last column (index 20) of the reversed source.
  EXPECT_EQ(t.value(0, 0), 20.0);
  EXPECT_EQ(t.value(1, 0), 120.0);
  m.entries[0].missing_sentinel = 120.0;
  const DataTable u = align_schema(d2_style_table(2), m, DatasetSide::kD2, FeatureSet::kCommon);
  EXPECT_TRUE(std::isnan(u.value(1, 0)));
}

TEST(SchemaMappingTest, DefaultFileCoversCommonSchema) {
  const SchemaMapping m = SchemaMapping::load_default();
  ASSERT_EQ(m.entries.size(), 20u);
  std::set<std::string> canonical;
  for (const auto& e : m.entries) canonical.insert(e.canonical_name);
  const auto names = FeatureSchema::common().names();
  EXPECT_EQ(canonical, std::set<std::string>(names.begin(), names.end()));
}

TEST(ImputeMedian, Examples) {
  DataTable t = impute_median(one_column({1, 2, kNaN, 4}, {0, 1, 0, 1}));
  EXPECT_EQ(t.column(0), (std::vector<double>{1, 2, 2, 4}));
  t = impute_median(one_column({1, kNaN, 3, 7}, {0, 1, 0, 1}));
  EXPECT_EQ(t.value(1, 0), 3.0);
  t = impute_median(one_column({1, kNaN, 3, 7, 8}, {0, 1, 0, 1, 0}));
  EXPECT_EQ(t.value(1, 0), 5.0);
  EXPECT_EQ(code_of([] { impute_median(one_column({kNaN, kNaN}, {0, 1})); }),
            ErrorCode::kAllMissingColumn);
}

TEST(ImputeMedian, TrainMediansAppliedToTest) {
  const auto imputer = MedianImputer::fit(one_column({1, 3, 5}, {0, 1, 0}));
  const DataTable test = imputer.apply(one_column({kNaN, 100}, {0, 1}));
  EXPECT_EQ(test.value(0, 0), 3.0);
  EXPECT_FALSE(test.has_missing());
}

TEST(DropConstantColumns, Examples) {
  const DataTable t("t", {"z", "k"}, {0, 0, 0, 0, 0, 1}, {0, 1, 0});
  const auto [out, dropped] = drop_constant_columns(t);
  EXPECT_EQ(dropped, std::vector<std::string>{"z"});
  EXPECT_EQ(out.column_names(), std::vector<std::string>{"k"});
}

DataTable labelled_rows(std::size_t phishing, std::size_t benign) {
  std::vector<double> v;
  std::vector<int> y;
  for (std::size_t i = 0; i < phishing + benign; ++i) {
    v.push_back(static_cast<double>(i));
    y.push_back(i < phishing ? kPhishing : kBenign);
  }
  return DataTable("t", {"id"}, v, y);
}

TEST(StratifiedSplit, ExactProportions) {
  const auto s = stratified_split(labelled_rows(10, 10), 0.30, 1);
  EXPECT_EQ(s.train.count_label(kPhishing), 7u);
  EXPECT_EQ(s.train.count_label(kBenign), 7u);
  EXPECT_EQ(s.test.count_label(kPhishing), 3u);
  EXPECT_EQ(s.test.count_label(kBenign), 3u);
}

TEST(StratifiedSplit, DisjointDeterministicAndStratified) {
  const DataTable t = labelled_rows(137, 301);
  const auto a = stratified_split(t, 0.30, 99);
  const auto b = stratified_split(t, 0.30, 99);
  EXPECT_EQ(a.train.column(0), b.train.column(0));
  EXPECT_EQ(a.test.column(0), b.test.column(0));
  std::set<double> train_ids;
  for (const double v : a.train.column(0)) train_ids.insert(v);
  for (const double v : a.test.column(0)) EXPECT_FALSE(train_ids.contains(v));
  EXPECT_EQ(a.train.n_rows() + a.test.n_rows(), t.n_rows());
  const double parent = 137.0 / 438.0;
  const double n_test = static_cast<double>(a.test.n_rows());
  EXPECT_LE(std::abs(static_cast<double>(a.test.count_label(kPhishing)) - parent * n_test), 1.0);
  const auto c = stratified_split(t, 0.30, 100);
  EXPECT_NE(a.test.column(0), c.test.column(0));
}

TEST(StratifiedSplit, DegenerateClass) {
  EXPECT_EQ(code_of([] { stratified_split(labelled_rows(1, 10), 0.3, 0); }),
            ErrorCode::kDegenerateClass);
}

TEST(StratifiedSplit, FixedTestCountsGiveExactSizes) {
  std::vector<int> labels(30647, kPhishing);
  labels.resize(30647 + 58000, kBenign);
  const auto idx = split_indices(labels, {0.30, 42, ClassCounts{17386, 9209}});
  std::size_t test_phish = 0;
  for (const auto i : idx.test) test_phish += labels[i] == kPhishing;
  EXPECT_EQ(test_phish, 9209u);
  EXPECT_EQ(idx.test.size() - test_phish, 17386u);
  EXPECT_EQ(idx.train.size(), 21438u + 40614u);
}

TEST(Smote, MidpointExample) {
  // Two minority rows; the only neighbour of each is the other.
  const DataTable t("t", {"a", "b"}, {0, 0, 2, 2, 9, 9, 9, 8, 8, 9}, {1, 1, 0, 0, 0});
  const DataTable out = smote(t, {.k = 1, .seed = 3});
  ASSERT_EQ(out.n_rows(), 6u);
  const auto r = out.row(5);
  EXPECT_DOUBLE_EQ(r[0], r[1]);
  EXPECT_GE(r[0], 0.0);
  EXPECT_LT(r[0], 2.0);
}

TEST(Smote, BalancedInputUnchanged) {
  const DataTable t = labelled_rows(5, 5);
  const DataTable out = smote(t, {.k = 2, .seed = 1});
  EXPECT_EQ(out.column(0), t.column(0));
  EXPECT_EQ(out.n_rows(), t.n_rows());
}

TEST(Smote, TooFewMinority) {
  EXPECT_EQ(code_of([] { smote(labelled_rows(3, 10), {.k = 5, .seed = 1}); }),
            ErrorCode::kTooFewMinoritySamples);
}

TEST(Smote, BinaryRoundingOption) {
  const DataTable t("t", {"flag", "v"},
                    {0, 0, 1, 1, 0, 2, 1, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
                    {1, 1, 1, 1, 0, 0, 0, 0, 0, 0});
  const DataTable out = smote(t, {.k = 3, .seed = 5, .round_binary = true});
  for (std::size_t i = t.n_rows(); i < out.n_rows(); ++i) {
    EXPECT_TRUE(out.value(i, 0) == 0.0 || out.value(i, 0) == 1.0);
  }
}

TEST(BuildMerged, CountsAndZeroSample) {
  const DataTable d1_train = labelled_rows(40, 60).renamed("D1");
  const DataTable d2_train = labelled_rows(11, 13).renamed("D2");
  const DataTable d1_test = labelled_rows(4, 6);
  const DataTable d2_test = labelled_rows(3, 2);
  const auto m = build_merged(d1_train, d2_train, d1_test, d2_test, 10, 7);
  EXPECT_EQ(m.train.count_label(kPhishing), 21u);
  EXPECT_EQ(m.train.count_label(kBenign), 23u);
  EXPECT_EQ(m.test.n_rows(), 15u);
  EXPECT_EQ(m.test.count_label(kPhishing), 7u);

  const auto z = build_merged(d1_train, d2_train, d1_test, d2_test, 0, 7);
  EXPECT_EQ(z.train.column(0), d2_train.column(0));
  EXPECT_EQ(std::vector<int>(z.train.labels().begin(), z.train.labels().end()),
            std::vector<int>(d2_train.labels().begin(), d2_train.labels().end()));

  EXPECT_EQ(code_of([&] { build_merged(d1_train, d2_train, d1_test, d2_test, 41, 7); }),
            ErrorCode::kInsufficientRows);
}

TEST(BuildMerged, CountsFromFullSizeInputs) {
  const auto m = build_merged(labelled_rows(21438, 40614), labelled_rows(6770, 6831),
                              labelled_rows(9209, 17386), labelled_rows(2945, 2885), 6800, 1);
  EXPECT_EQ(m.train.count_label(kPhishing), 13570u);
  EXPECT_EQ(m.train.count_label(kBenign), 13631u);
  EXPECT_EQ(m.test.count_label(kPhishing), 12154u);
  EXPECT_EQ(m.test.count_label(kBenign), 20271u);
}

TEST(Manifest, ContainsCounts) {
  const auto j = table_manifest(labelled_rows(3, 4).renamed("X"), 11);
  EXPECT_EQ(j["name"], "X");
  EXPECT_EQ(j["seed"], 11);
  EXPECT_EQ(j["phishing"], 3);
  EXPECT_EQ(j["benign"], 4);
}

}  // namespace
}  // namespace phishaudit
