#include "robust1d/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "robust1d/errors.hpp"
#include "robust1d/format.hpp"
#include "robust1d/keyvalue.hpp"
#include "robust1d/rng.hpp"

namespace robust1d {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("cannot write '" + path + "'");
}

std::string base_name(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

bool parse_positive(const std::string& s, std::size_t& out) {
  const char* first = s.data();
  const char* last = first + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && first != last && out >= 1;
}

bool parse_number(const std::string& s, double& out) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return false;
  const char* first = s.data() + b;
  const char* last = s.data() + e + 1;
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && std::isfinite(out);
}

}  // namespace

namespace csv {

std::vector<Row> parse(const std::string& text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false, field_quoted = false, any = false;
  std::size_t line = 1;
  row.line = 1;

  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_quoted = false;
  };
  auto end_row = [&] {
    if (any) {
      end_field();
      rows.push_back(std::move(row));
    }
    row = Row{};
    row.line = line;
    field.clear();
    field_quoted = false;
    any = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
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
      continue;
    }
    switch (c) {
      case '"':
        any = true;
        if (field.empty() && !field_quoted) {
          in_quotes = true;
          field_quoted = true;
        } else {
          row.well_formed = false;
          field += c;
        }
        break;
      case ',':
        any = true;
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        ++line;
        end_row();
        break;
      default:
        any = true;
        // Characters after a closing quote are a quoting error.
        if (field_quoted) row.well_formed = false;
        field += c;
    }
  }
  if (in_quotes) row.well_formed = false;
  end_row();
  return rows;
}

std::string quote(const std::string& field) {
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += quote(fields[i]);
  }
  return out + "\n";
}

}  // namespace csv

std::vector<std::size_t> TextDataset::labels0() const {
  std::vector<std::size_t> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label - 1);
  return out;
}

std::vector<std::string> TextDataset::texts() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.text);
  return out;
}

TextDataset TextDataset::subset(const std::vector<std::size_t>& indices) const {
  TextDataset out{name, {}, num_classes, 0};
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(records.at(i));
  return out;
}

TextDataset parse_text_csv(const std::string& content, const std::string& name, std::size_t expected_classes) {
  TextDataset ds{name, {}, expected_classes, 0};
  std::size_t max_label = 0;
  for (const auto& row : csv::parse(content)) {
    std::size_t label = 0;
    if (!row.well_formed || row.fields.size() < 2 || !parse_positive(row.fields[0], label) ||
        (expected_classes && label > expected_classes)) {
      ++ds.malformed;
      continue;
    }
    std::string text = row.fields[1];
    if (row.fields.size() > 2 && !row.fields[2].empty()) text += " " + row.fields[2];
    ds.records.push_back({label, std::move(text)});
    max_label = std::max(max_label, label);
  }
  if (ds.records.empty()) throw FormatError("'" + name + "' has no valid rows (" + std::to_string(ds.malformed) + " malformed)");
  if (!expected_classes) ds.num_classes = max_label;
  return ds;
}

TextDataset load_text_csv(const std::string& path, std::size_t expected_classes) {
  return parse_text_csv(read_file(path), base_name(path), expected_classes);
}

void write_text_csv(const TextDataset& dataset, const std::string& path) {
  std::string out;
  for (const auto& r : dataset.records) out += csv::format_row({std::to_string(r.label), r.text});
  write_file(path, out);
}

MinMaxScaler MinMaxScaler::fit(const Tensor& raw) {
  if (raw.rank() != 2) throw ShapeError("scaler expects [rows x features], got " + shape_string(raw.shape()));
  const std::size_t n = raw.dim(0), f = raw.dim(1);
  MinMaxScaler s{std::vector<double>(f), std::vector<double>(f)};
  for (std::size_t j = 0; j < f; ++j) {
    s.min[j] = s.max[j] = raw.at(0, j);
    for (std::size_t i = 1; i < n; ++i) {
      s.min[j] = std::min(s.min[j], raw.at(i, j));
      s.max[j] = std::max(s.max[j], raw.at(i, j));
    }
  }
  return s;
}

std::size_t MinMaxScaler::apply(Tensor& rows) const {
  if (rows.rank() != 2 || rows.dim(1) != min.size()) {
    throw ShapeError("scaler fitted on " + std::to_string(min.size()) + " features, got " + shape_string(rows.shape()));
  }
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < rows.dim(0); ++i) {
    for (std::size_t j = 0; j < min.size(); ++j) {
      const double range = max[j] - min[j];
      double v = range > 0.0 ? (rows.at(i, j) - min[j]) / range : 0.0;
      if (v < 0.0 || v > 1.0) {
        v = std::clamp(v, 0.0, 1.0);
        ++clipped;
      }
      rows.at(i, j) = v;
    }
  }
  return clipped;
}

TabularDataset TabularDataset::subset(const std::vector<std::size_t>& indices) const {
  if (indices.empty()) throw ContractViolation("empty tabular subset");
  TabularDataset out = *this;
  const std::size_t f = features.dim(1);
  out.features = Tensor({indices.size(), f});
  out.labels.clear();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    for (std::size_t j = 0; j < f; ++j) out.features.at(k, j) = features.at(indices[k], j);
    out.labels.push_back(labels.at(indices[k]));
  }
  return out;
}

RawTable parse_tabular_csv(const std::string& content, const std::string& name, const TabularSchema& schema) {
  auto rows = csv::parse(content);
  if (rows.empty()) throw FormatError("'" + name + "' is empty");
  const auto header = rows.front().fields;
  rows.erase(rows.begin());
  if (rows.empty()) throw FormatError("'" + name + "' has a header but no rows");

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  auto find = [&](const std::string& c) {
    const auto it = column.find(c);
    if (it == column.end()) throw FormatError("'" + name + "' has no column '" + c + "'");
    return it->second;
  };
  const std::size_t label_col = find(schema.label);

  for (const auto& row : rows) {
    if (!row.well_formed || row.fields.size() != header.size()) {
      throw FormatError("'" + name + "' line " + std::to_string(row.line) + ": expected " +
                        std::to_string(header.size()) + " fields");
    }
  }

  std::vector<std::size_t> cols;
  std::vector<std::string> names;
  if (!schema.features.empty()) {
    for (const auto& c : schema.features) {
      cols.push_back(find(c));
      names.push_back(c);
    }
  } else {
    const std::set<std::string> drop(schema.drop.begin(), schema.drop.end());
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == label_col || drop.count(header[i])) continue;
      double v = 0.0;
      const bool numeric =
          std::all_of(rows.begin(), rows.end(), [&](const csv::Row& r) { return parse_number(r.fields[i], v); });
      if (!numeric) continue;
      cols.push_back(i);
      names.push_back(header[i]);
    }
    if (cols.empty()) throw FormatError("'" + name + "' has no numeric feature columns");
  }

  RawTable t;
  t.name = name;
  t.feature_names = names;
  t.values = Tensor({rows.size(), cols.size()});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      double v = 0.0;
      if (!parse_number(rows[r].fields[cols[j]], v)) {
        throw FormatError("'" + name + "' line " + std::to_string(rows[r].line) + ": column '" + names[j] +
                          "' is not numeric");
      }
      t.values.at(r, j) = v;
    }
  }

  if (schema.label_mode == LabelMode::Binary) {
    t.num_classes = 2;
    t.class_names = {"0", "1"};
    for (const auto& row : rows) {
      double v = 0.0;
      if (!parse_number(row.fields[label_col], v)) {
        throw FormatError("'" + name + "' line " + std::to_string(row.line) + ": binary label is not numeric");
      }
      t.labels.push_back(v != 0.0 ? 1 : 0);
    }
  } else {
    std::set<std::string> distinct;
    for (const auto& row : rows) distinct.insert(row.fields[label_col]);
    t.class_names.assign(distinct.begin(), distinct.end());
    t.num_classes = t.class_names.size();
    for (const auto& row : rows) {
      t.labels.push_back(static_cast<std::size_t>(
          std::lower_bound(t.class_names.begin(), t.class_names.end(), row.fields[label_col]) - t.class_names.begin()));
    }
  }
  return t;
}

RawTable read_tabular_csv(const std::string& path, const TabularSchema& schema) {
  return parse_tabular_csv(read_file(path), base_name(path), schema);
}

TabularDataset normalize(const RawTable& raw, const std::vector<std::size_t>& fit_rows) {
  TabularDataset ds;
  ds.name = raw.name;
  ds.labels = raw.labels;
  ds.num_classes = raw.num_classes;
  ds.feature_names = raw.feature_names;
  ds.class_names = raw.class_names;
  if (fit_rows.empty()) {
    ds.scaler = MinMaxScaler::fit(raw.values);
  } else {
    const std::size_t f = raw.values.dim(1);
    Tensor fit({fit_rows.size(), f});
    for (std::size_t k = 0; k < fit_rows.size(); ++k)
      for (std::size_t j = 0; j < f; ++j) fit.at(k, j) = raw.values.at(fit_rows[k], j);
    ds.scaler = MinMaxScaler::fit(fit);
  }
  ds.features = raw.values;
  ds.clipped = ds.scaler.apply(ds.features);
  return ds;
}

TabularDataset load_tabular_csv(const std::string& path, const TabularSchema& schema) {
  return normalize(read_tabular_csv(path, schema));
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ContractViolation("train fraction must lie in (0,1)");
}

namespace {

std::size_t cut_point(std::size_t n, double fraction) {
  if (n < 2) return n;
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

}  // namespace

SplitIndices split_indices(const std::vector<std::size_t>& labels, const SplitSpec& spec) {
  spec.validate();
  if (labels.size() < 2) throw ContractViolation("split needs at least two records");
  Rng rng(spec.seed);
  SplitIndices out;
  if (!spec.stratify) {
    auto order = rng.permutation(labels.size());
    const std::size_t k = cut_point(order.size(), spec.train_fraction);
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  } else {
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (auto& [label, members] : by_class) {
      if (members.size() < 2) {
        throw ContractViolation("stratified split: class " + std::to_string(label) + " has fewer than 2 records");
      }
      rng.shuffle(members);
      const std::size_t k = cut_point(members.size(), spec.train_fraction);
      out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(k));
      out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(k), members.end());
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

TextSplit split(const TextDataset& dataset, const SplitSpec& spec) {
  const auto idx = split_indices(dataset.labels0(), spec);
  return {dataset.subset(idx.train), dataset.subset(idx.test)};
}

TabularSplit split(const RawTable& raw, const SplitSpec& spec) {
  const auto idx = split_indices(raw.labels, spec);
  const TabularDataset scaled = normalize(raw, idx.train);
  TabularSplit out{scaled.subset(idx.train), scaled.subset(idx.test)};
  // Only values outside the training range are clipped, and those are all in
  // the test rows.
  out.train.clipped = 0;
  out.test.clipped = scaled.clipped;
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t count, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw ContractViolation("batch size must be at least 1");
  Rng rng(seed);
  const auto order = rng.permutation(count);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < count; b += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(count, b + batch_size)));
  }
  return out;
}

namespace {

constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz";

std::string random_word(Rng& rng, std::size_t length) {
  std::string w;
  for (std::size_t i = 0; i < length; ++i) w += kLetters[rng.index(kLetters.size())];
  return w;
}

struct SynthVocabulary {
  std::vector<std::vector<std::string>> keywords;
  std::vector<std::string> fillers;
};

SynthVocabulary synth_vocabulary(std::size_t classes, std::uint64_t seed, const SynthTextOptions& options) {
  if (classes < 2) throw ContractViolation("synthetic corpus needs at least two classes");
  if (options.keywords_per_class < 1 || options.filler_vocabulary < 1) {
    throw ContractViolation("synthetic corpus needs keywords and fillers");
  }
  Rng rng(derive_seed(seed, 0x766f636162ULL));
  std::set<std::string> used;
  SynthVocabulary v;
  v.keywords.resize(classes);
  for (auto& set : v.keywords) {
    while (set.size() < options.keywords_per_class) {
      std::string w = random_word(rng, 5);
      if (used.insert(w).second) set.push_back(std::move(w));
    }
  }
  // Fillers are at most four letters, so they can never equal a keyword.
  while (v.fillers.size() < options.filler_vocabulary) {
    std::string w = random_word(rng, 2 + rng.index(3));
    if (used.insert(w).second) v.fillers.push_back(std::move(w));
  }
  return v;
}

}  // namespace

std::vector<std::vector<std::string>> synth_keywords(std::size_t classes, std::uint64_t seed,
                                                     const SynthTextOptions& options) {
  return synth_vocabulary(classes, seed, options).keywords;
}

TextDataset synth_text_dataset(std::size_t classes, std::size_t per_class, std::uint64_t seed,
                               const SynthTextOptions& options) {
  const SynthVocabulary v = synth_vocabulary(classes, seed, options);
  Rng rng(derive_seed(seed, 0x73616d706c65ULL));
  TextDataset ds{"synth", {}, classes, 0};
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<std::string> words;
      const std::size_t fillers = 8 + rng.index(13), signatures = 2 + rng.index(3);
      for (std::size_t k = 0; k < fillers; ++k) words.push_back(v.fillers[rng.index(v.fillers.size())]);
      for (std::size_t k = 0; k < signatures; ++k) words.push_back(v.keywords[c][rng.index(v.keywords[c].size())]);
      rng.shuffle(words);
      std::string text;
      for (std::size_t k = 0; k < words.size(); ++k) text += (k ? " " : "") + words[k];
      ds.records.push_back({c + 1, std::move(text)});
    }
  }
  return ds;
}

std::size_t keyword_oracle(const std::vector<std::vector<std::string>>& keywords, const std::string& text) {
  std::map<std::string, std::size_t> owner;
  for (std::size_t c = 0; c < keywords.size(); ++c)
    for (const auto& w : keywords[c]) owner[w] = c;
  std::vector<std::size_t> counts(keywords.size(), 0);
  std::istringstream in(text);
  std::string w;
  while (in >> w) {
    if (const auto it = owner.find(w); it != owner.end()) ++counts[it->second];
  }
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin()) + 1;
}

RawTable synth_tabular(std::size_t rows, std::uint64_t seed, const SynthTabularOptions& o) {
  if (rows < 2) throw ContractViolation("synthetic table needs at least two rows");
  const std::size_t f = o.robust_features + o.fragile_features;
  if (f == 0) throw ContractViolation("synthetic table needs features");
  Rng rng(seed);
  RawTable t;
  t.name = "synth-tabular";
  t.values = Tensor({rows, f});
  t.num_classes = 2;
  t.class_names = {"0", "1"};
  for (std::size_t j = 0; j < f; ++j) {
    t.feature_names.push_back((j < o.robust_features ? "r" : "f") + std::to_string(j));
  }
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t y = i % 2;
    const double s = y ? 1.0 : -1.0;
    t.labels.push_back(y);
    for (std::size_t j = 0; j < f; ++j) {
      const bool robust = j < o.robust_features;
      const double mean = 0.5 + s * (robust ? o.robust_shift : o.fragile_shift);
      const double v = mean + (robust ? o.robust_noise : o.fragile_noise) * rng.normal();
      t.values.at(i, j) = std::clamp(v, 0.0, 1.0);
    }
  }
  return t;
}

void write_tabular_csv(const RawTable& table, const std::string& path) {
  std::vector<std::string> header = table.feature_names;
  header.push_back("label");
  std::string out = csv::format_row(header);
  for (std::size_t i = 0; i < table.labels.size(); ++i) {
    std::vector<std::string> row;
    for (std::size_t j = 0; j < table.feature_names.size(); ++j) row.push_back(format_double(table.values.at(i, j)));
    row.push_back(table.class_names.empty() ? std::to_string(table.labels[i]) : table.class_names[table.labels[i]]);
    out += csv::format_row(row);
  }
  write_file(path, out);
}

std::string DatasetManifest::to_text() const {
  KeyValueFile kv;
  kv.set("name", KeyValueFile::quote(name));
  kv.set("kind", KeyValueFile::quote(kind));
  kv.set("path", KeyValueFile::quote(path));
  kv.set("classes", std::to_string(num_classes));
  kv.set("split_seed", std::to_string(split.seed));
  kv.set("train_fraction", format_double(split.train_fraction));
  kv.set("stratify", split.stratify ? "true" : "false");
  if (kind == "tabular") {
    kv.set("label_column", KeyValueFile::quote(label_column));
    kv.set("label_mode", KeyValueFile::quote(label_mode == LabelMode::Binary ? "binary" : "categorical"));
    std::string cols = "[";
    for (std::size_t i = 0; i < feature_columns.size(); ++i) cols += (i ? ", " : "") + KeyValueFile::quote(feature_columns[i]);
    kv.set("features", cols + "]");
  }
  return kv.to_string();
}

void DatasetManifest::save(const std::string& file) const { write_file(file, to_text()); }

DatasetManifest DatasetManifest::load(const std::string& file) {
  const KeyValueFile kv = KeyValueFile::load(file);
  DatasetManifest m;
  m.path = kv.get_string("path");
  // Relative dataset paths are resolved against the manifest's directory.
  if (!m.path.empty() && m.path.front() != '/') {
    const auto slash = file.find_last_of('/');
    if (slash != std::string::npos) m.path = file.substr(0, slash + 1) + m.path;
  }
  if (!std::filesystem::exists(m.path)) throw FormatError("manifest data file " + m.path + " does not exist");
  m.kind = kv.get_string("kind", "text");
  if (m.kind != "text" && m.kind != "tabular") throw FormatError("manifest kind must be text or tabular, got " + m.kind);
  m.name = kv.get_string("name", base_name(m.path));
  const auto classes = kv.get_int("classes", 0);
  if (classes < 0) throw FormatError("manifest classes must be >= 0");
  m.num_classes = static_cast<std::size_t>(classes);
  m.split.seed = static_cast<std::uint64_t>(kv.get_int("split_seed", 0));
  m.split.train_fraction = kv.get_real("train_fraction", 0.8);
  m.split.stratify = kv.get_bool("stratify", true);
  m.label_column = kv.get_string("label_column", "label");
  const std::string mode = kv.get_string("label_mode", "binary");
  if (mode != "binary" && mode != "categorical") throw FormatError("manifest label_mode must be binary or categorical");
  m.label_mode = mode == "binary" ? LabelMode::Binary : LabelMode::Categorical;
  if (kv.has("features")) m.feature_columns = kv.get_list("features");
  return m;
}

}  // namespace robust1d
