#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "robust1d/tensor.hpp"

namespace robust1d {

namespace csv {

struct Row {
  std::vector<std::string> fields;
  /// False for rows with broken quoting.
  bool well_formed = true;
  std::size_t line = 0;
};

/// RFC 4180 records: quoted fields may hold commas, doubled quotes and line
/// breaks; CRLF and LF both end a record. Blank lines are skipped.
std::vector<Row> parse(const std::string& text);
std::string quote(const std::string& field);
std::string format_row(const std::vector<std::string>& fields);

}  // namespace csv

struct TextRecord {
  /// 1-based class index.
  std::size_t label = 1;
  std::string text;
  bool operator==(const TextRecord&) const = default;
};

struct TextDataset {
  std::string name;
  std::vector<TextRecord> records;
  std::size_t num_classes = 0;
  /// Rows skipped while loading.
  std::size_t malformed = 0;

  std::size_t size() const { return records.size(); }
  /// 0-based labels for the losses.
  std::vector<std::size_t> labels0() const;
  std::vector<std::string> texts() const;
  TextDataset subset(const std::vector<std::size_t>& indices) const;
};

/// Rows are "class","title"[,"body"[,extra...]]; text is title, plus a space
/// and body when the body is non-empty. Extra columns are ignored. Rows with
/// fewer than two fields, broken quoting, or a label that is not a positive
/// integer are counted as malformed. num_classes is the largest label unless
/// `expected_classes` is given, in which case larger labels are malformed.
TextDataset load_text_csv(const std::string& path, std::size_t expected_classes = 0);
TextDataset parse_text_csv(const std::string& content, const std::string& name, std::size_t expected_classes = 0);
/// Writes "label","text" rows; load_text_csv reads them back unchanged.
void write_text_csv(const TextDataset& dataset, const std::string& path);

/// Per-feature min-max scaling onto [0,1]. Constant features map to 0.
struct MinMaxScaler {
  std::vector<double> min;
  std::vector<double> max;

  static MinMaxScaler fit(const Tensor& raw);
  /// Scales rows in place and clips to [0,1]; returns how many values were clipped.
  std::size_t apply(Tensor& rows) const;
};

enum class LabelMode { Binary, Categorical };

struct TabularSchema {
  /// Feature columns; empty selects every numeric column not listed in `drop`.
  std::vector<std::string> features;
  std::string label = "label";
  /// Identifier and alternate-label columns excluded from automatic selection.
  std::vector<std::string> drop{"id", "srcip", "sport", "dstip", "dsport", "stime", "ltime", "attack_cat"};
  /// Binary: any nonzero numeric label is class 1. Categorical: distinct label
  /// strings in sorted order.
  LabelMode label_mode = LabelMode::Binary;
};

struct TabularDataset {
  std::string name;
  /// [N x F], every value in [0,1].
  Tensor features;
  /// 0-based.
  std::vector<std::size_t> labels;
  std::size_t num_classes = 2;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  MinMaxScaler scaler;
  /// Values clipped into [0,1] by a scaler fitted on other data.
  std::size_t clipped = 0;

  std::size_t size() const { return labels.size(); }
  TabularDataset subset(const std::vector<std::size_t>& indices) const;
};

/// Unscaled table as read from disk.
struct RawTable {
  std::string name;
  Tensor values;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 2;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
};

RawTable read_tabular_csv(const std::string& path, const TabularSchema& schema);
RawTable parse_tabular_csv(const std::string& content, const std::string& name, const TabularSchema& schema);
/// Scales with statistics of `fit_rows` (all rows when empty).
TabularDataset normalize(const RawTable& raw, const std::vector<std::size_t>& fit_rows = {});
/// Reads and min-max normalizes over the whole file.
TabularDataset load_tabular_csv(const std::string& path, const TabularSchema& schema);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool stratify = true;
  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle then cut; per class when stratified. Both sides are sorted.
SplitIndices split_indices(const std::vector<std::size_t>& labels, const SplitSpec& spec);

struct TextSplit {
  TextDataset train;
  TextDataset test;
};
TextSplit split(const TextDataset& dataset, const SplitSpec& spec);

struct TabularSplit {
  TabularDataset train;
  TabularDataset test;
};
/// Fits the scaler on the training rows only; test values are clipped.
TabularSplit split(const RawTable& raw, const SplitSpec& spec);

/// Index batches over one epoch in a seeded order; the last batch may be short.
std::vector<std::vector<std::size_t>> batches(std::size_t count, std::size_t batch_size, std::uint64_t seed);

struct SynthTextOptions {
  std::size_t keywords_per_class = 3;
  std::size_t filler_vocabulary = 200;
};

/// Each class owns a set of five-letter signature keywords; samples are 8-20
/// two-to-four-letter filler words with 2-4 of their class's keywords mixed in.
TextDataset synth_text_dataset(std::size_t classes, std::size_t per_class, std::uint64_t seed,
                               const SynthTextOptions& options = {});
/// The signature keywords of each class, as generated for `seed`.
std::vector<std::vector<std::string>> synth_keywords(std::size_t classes, std::uint64_t seed,
                                                     const SynthTextOptions& options = {});
/// 1-based class whose keywords occur most often; ties go to the lower class.
std::size_t keyword_oracle(const std::vector<std::vector<std::string>>& keywords, const std::string& text);

struct SynthTabularOptions {
  std::size_t robust_features = 4;
  std::size_t fragile_features = 12;
  /// Class-mean offset of the robust features around 0.5.
  double robust_shift = 0.2;
  double robust_noise = 0.12;
  /// Class-mean offset of the fragile features; small enough that an
  /// epsilon = 0.1 perturbation can flip them.
  double fragile_shift = 0.06;
  double fragile_noise = 0.05;
};

/// Binary flow-like table. A few strongly separated but noisy features carry
/// a robust signal; many weakly shifted, low-noise features carry a signal
/// that is accurate but easy to perturb. Raw values lie in [0,1].
RawTable synth_tabular(std::size_t rows, std::uint64_t seed, const SynthTabularOptions& options = {});
void write_tabular_csv(const RawTable& table, const std::string& path);

/// Plain-text key=value description of a dataset on disk.
struct DatasetManifest {
  std::string name;
  /// "text" or "tabular".
  std::string kind = "text";
  std::string path;
  std::size_t num_classes = 0;
  SplitSpec split;
  std::string label_column = "label";
  std::vector<std::string> feature_columns;
  LabelMode label_mode = LabelMode::Binary;

  static DatasetManifest load(const std::string& path);
  void save(const std::string& path) const;
  std::string to_text() const;
};

}  // namespace robust1d
