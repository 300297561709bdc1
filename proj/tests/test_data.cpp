#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "robust1d/data.hpp"
#include "robust1d/errors.hpp"
#include "robust1d/keyvalue.hpp"
#include "robust1d/rng.hpp"
#include "temp_dir.hpp"

namespace robust1d {
namespace {

namespace fs = std::filesystem;

using testing_util::TempDir;

TEST(Csv, QuotingRules) {
  const auto rows = csv::parse("\"a\",\"b,c\"\r\n\"say \"\"hi\"\"\",x\n\n\"multi\nline\",2\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].fields, (std::vector<std::string>{"a", "b,c"}));
  EXPECT_EQ(rows[1].fields, (std::vector<std::string>{"say \"hi\"", "x"}));
  EXPECT_EQ(rows[2].fields, (std::vector<std::string>{"multi\nline", "2"}));
  for (const auto& r : rows) EXPECT_TRUE(r.well_formed);
  EXPECT_FALSE(csv::parse("\"a\"b,c\n")[0].well_formed);
  EXPECT_FALSE(csv::parse("a\"b,c\n")[0].well_formed);
  EXPECT_FALSE(csv::parse("\"open,c\n")[0].well_formed);
  EXPECT_EQ(csv::parse("a,,\n")[0].fields, (std::vector<std::string>{"a", "", ""}));
}

TEST(Csv, FormatRoundTripsArbitraryFields) {
  Rng rng(3);
  const std::string alphabet = "ab,\"\n\r x";
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> fields(1 + rng.index(4));
    for (auto& f : fields)
      for (std::size_t k = rng.index(8); k > 0; --k) f += alphabet[rng.index(alphabet.size())];
    const auto rows = csv::parse(csv::format_row(fields));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_TRUE(rows[0].well_formed);
    EXPECT_EQ(rows[0].fields, fields);
  }
}

TEST(TextCsv, Examples) {
  const auto ds = parse_text_csv("\"2\",\"good item\",\"loved it\"\n", "t");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.records[0], (TextRecord{2, "good item loved it"}));
  EXPECT_EQ(ds.num_classes, 2u);

  const auto quoted = parse_text_csv("\"1\",\"a \"\"quoted\"\" title\",\"body, with comma\"\n", "t");
  EXPECT_EQ(quoted.records[0].text, "a \"quoted\" title body, with comma");

  const auto mixed = parse_text_csv("\"1\",\"a\"\n\"2\",\"b\",\"c\"\n\"x\",\"bad label\"\n\"3\",\"c\"\n", "t");
  EXPECT_EQ(mixed.size(), 3u);
  EXPECT_EQ(mixed.malformed, 1u);
  EXPECT_EQ(mixed.num_classes, 3u);
  EXPECT_EQ(parse_text_csv("\"0\",\"zero\"\n\"1\",\"a\"\n\"1\"\n", "t").malformed, 2u);
  EXPECT_EQ(parse_text_csv("\"5\",\"too big\"\n\"1\",\"a\"\n", "t", 4).malformed, 1u);
  EXPECT_THROW(parse_text_csv("\"x\",\"a\"\n", "t"), FormatError);
  EXPECT_THROW(load_text_csv("/nonexistent/file.csv"), IoError);
}

TEST_F(TempDir, TextDatasetRoundTrip) {
  Rng rng(4);
  TextDataset ds{"x", {}, 4, 0};
  const std::string alphabet = "abc ,\"\n'";
  for (int i = 0; i < 200; ++i) {
    std::string text;
    for (std::size_t k = 1 + rng.index(30); k > 0; --k) text += alphabet[rng.index(alphabet.size())];
    ds.records.push_back({1 + rng.index(4), text});
  }
  write_text_csv(ds, path("d.csv"));
  const auto back = load_text_csv(path("d.csv"), 4);
  EXPECT_EQ(back.records, ds.records);
  EXPECT_EQ(back.malformed, 0u);
}

TEST(Tabular, MinMaxExamples) {
  const auto raw = parse_tabular_csv("a,b,label\n0,7,0\n5,7,1\n10,7,1\n", "t", {});
  const auto ds = normalize(raw);
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.features, Tensor({3, 2}, {0, 0, 0.5, 0, 1, 0}));
  EXPECT_EQ(ds.labels, (std::vector<std::size_t>{0, 1, 1}));
  EXPECT_EQ(ds.clipped, 0u);

  // Statistics from the first two rows only; the third overflows and is clipped.
  const auto partial = normalize(raw, {0, 1});
  EXPECT_EQ(partial.features.at(2, 0), 1.0);
  EXPECT_EQ(partial.clipped, 1u);
}

TEST(Tabular, SchemaHandling) {
  const std::string content =
      "id,srcip,dur,proto,sbytes,attack_cat,label\n"
      "1,1.2.3.4,0.5,tcp,100,Normal,0\n"
      "2,1.2.3.5,1.5,udp,300,Exploits,1\n";
  const auto raw = parse_tabular_csv(content, "unsw", {});
  EXPECT_EQ(raw.feature_names, (std::vector<std::string>{"dur", "sbytes"}));
  EXPECT_EQ(raw.labels, (std::vector<std::size_t>{0, 1}));

  TabularSchema cats;
  cats.label = "attack_cat";
  cats.label_mode = LabelMode::Categorical;
  cats.features = {"sbytes"};
  const auto by_cat = parse_tabular_csv(content, "unsw", cats);
  EXPECT_EQ(by_cat.class_names, (std::vector<std::string>{"Exploits", "Normal"}));
  EXPECT_EQ(by_cat.labels, (std::vector<std::size_t>{1, 0}));

  TabularSchema missing;
  missing.features = {"dur", "nope"};
  try {
    parse_tabular_csv(content, "unsw", missing);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos);
  }
  TabularSchema text_feature;
  text_feature.features = {"proto"};
  EXPECT_THROW(parse_tabular_csv(content, "unsw", text_feature), FormatError);
  EXPECT_THROW(parse_tabular_csv("a,label\n1,0\n2\n", "t", {}), FormatError);
}

TEST(Tabular, SplitNormalizesWithTrainStatisticsAndStaysInBox) {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    RawTable raw;
    raw.name = "r";
    const std::size_t n = 10 + rng.index(50), f = 1 + rng.index(5);
    raw.values = Tensor({n, f});
    for (double& v : raw.values.data()) v = rng.uniform(-100, 100);
    for (std::size_t i = 0; i < n; ++i) raw.labels.push_back(i % 2);
    raw.feature_names.assign(f, "x");
    const auto s = split(raw, {0.7, rng.next(), true});
    EXPECT_EQ(s.train.size() + s.test.size(), n);
    EXPECT_EQ(s.train.clipped, 0u);
    for (const auto* part : {&s.train, &s.test})
      for (double v : part->features.data()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    // Each training column spans exactly [0,1].
    for (std::size_t j = 0; j < f; ++j) {
      double lo = 1, hi = 0;
      for (std::size_t i = 0; i < s.train.size(); ++i) {
        lo = std::min(lo, s.train.features.at(i, j));
        hi = std::max(hi, s.train.features.at(i, j));
      }
      EXPECT_EQ(lo, 0.0);
      EXPECT_EQ(hi, 1.0);
    }
  }
}

TEST(Split, Examples) {
  const std::vector<std::size_t> ten(10, 0);
  const auto s = split_indices(ten, {0.8, 1, false});
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_EQ(split_indices(ten, {0.8, 1, false}).train, s.train);
  EXPECT_THROW(split_indices(ten, {1.0, 1, false}), ContractViolation);
  EXPECT_THROW(split_indices(std::vector<std::size_t>{0, 0, 1}, {0.5, 1, true}), ContractViolation);
}

TEST(Split, DisjointExhaustiveAndStratified) {
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t classes = 2 + rng.index(3), per = 2 + rng.index(30);
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < classes; ++c) labels.insert(labels.end(), per, c);
    const SplitSpec spec{rng.uniform(0.1, 0.9), rng.next(), trial % 2 == 0};
    const auto s = split_indices(labels, spec);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (std::size_t i : s.test) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), labels.size());
    if (spec.stratify) {
      for (std::size_t c = 0; c < classes; ++c) {
        const auto count = static_cast<double>(std::count_if(s.train.begin(), s.train.end(),
                                                             [&](std::size_t i) { return labels[i] == c; }));
        EXPECT_LE(std::abs(count - spec.train_fraction * static_cast<double>(per)), 1.0);
      }
    }
  }
}

TEST(Batches, Examples) {
  const auto b = batches(300, 128, 5);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size(), 128u);
  EXPECT_EQ(b[1].size(), 128u);
  EXPECT_EQ(b[2].size(), 44u);
  EXPECT_EQ(batches(300, 128, 5), b);
  EXPECT_NE(batches(300, 128, 6), b);
  std::vector<int> seen(300, 0);
  for (const auto& batch : b)
    for (std::size_t i : batch) ++seen[i];
  EXPECT_EQ(std::count(seen.begin(), seen.end(), 1), 300);
  EXPECT_THROW(batches(10, 0, 1), ContractViolation);
}

TEST(SynthText, ShapeBalanceAndOracle) {
  const auto ds = synth_text_dataset(3, 100, 1);
  ASSERT_EQ(ds.size(), 300u);
  std::vector<std::size_t> counts(4, 0);
  for (const auto& r : ds.records) ++counts[r.label];
  EXPECT_EQ(counts, (std::vector<std::size_t>{0, 100, 100, 100}));
  const auto keywords = synth_keywords(3, 1);
  for (const auto& r : ds.records) {
    EXPECT_EQ(keyword_oracle(keywords, r.text), r.label);
    std::size_t words = 0, signature = 0;
    std::istringstream in(r.text);
    for (std::string w; in >> w; ++words) {
      signature += std::count(keywords[r.label - 1].begin(), keywords[r.label - 1].end(), w);
    }
    EXPECT_GE(words, 10u);
    EXPECT_LE(words, 24u);
    EXPECT_GE(signature, 2u);
    EXPECT_LE(signature, 4u);
    EXPECT_LE(r.text.size(), 128u);
  }
  EXPECT_EQ(synth_text_dataset(3, 100, 1).records, ds.records);
  EXPECT_NE(synth_text_dataset(3, 100, 2).records, ds.records);
  EXPECT_THROW(synth_text_dataset(1, 10, 1), ContractViolation);
}

TEST(SynthTabular, RangeAndBalance) {
  const auto t = synth_tabular(100, 3);
  EXPECT_EQ(t.values.dim(0), 100u);
  EXPECT_EQ(std::count(t.labels.begin(), t.labels.end(), 1u), 50);
  for (double v : t.values.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST_F(TempDir, TabularWriteReadAndManifest) {
  const auto t = synth_tabular(20, 3);
  write_tabular_csv(t, path("t.csv"));
  const auto back = read_tabular_csv(path("t.csv"), {});
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(back.labels, t.labels);
  EXPECT_EQ(back.feature_names, t.feature_names);

  DatasetManifest m;
  m.name = "flows";
  m.kind = "tabular";
  m.path = "t.csv";
  m.num_classes = 2;
  m.split = {0.75, 42, false};
  m.feature_columns = {"r0", "f5"};
  m.save(path("m.toml"));
  const auto loaded = DatasetManifest::load(path("m.toml"));
  EXPECT_EQ(loaded.path, path("t.csv"));
  EXPECT_EQ(loaded.name, "flows");
  EXPECT_EQ(loaded.split.seed, 42u);
  EXPECT_EQ(loaded.split.train_fraction, 0.75);
  EXPECT_FALSE(loaded.split.stratify);
  EXPECT_EQ(loaded.feature_columns, m.feature_columns);
}

TEST(KeyValue, ParsesTomlSubset) {
  const auto kv = KeyValueFile::parse(
      "# comment\nseed = 7\nname = \"a # not comment\"  # trailing\n[train]\nepochs = 10\nlr = 1e-3\n"
      "adversarial = true\n[attacks]\nlist = [\"pgd:eps=8/255\", \"text:score=r1s\"]\neps = 8/255\n");
  EXPECT_EQ(kv.get_int("seed"), 7);
  EXPECT_EQ(kv.get_string("name"), "a # not comment");
  EXPECT_EQ(kv.get_int("train.epochs"), 10);
  EXPECT_DOUBLE_EQ(kv.get_real("train.lr"), 1e-3);
  EXPECT_TRUE(kv.get_bool("train.adversarial"));
  EXPECT_EQ(kv.get_list("attacks.list"), (std::vector<std::string>{"pgd:eps=8/255", "text:score=r1s"}));
  EXPECT_DOUBLE_EQ(kv.get_real("attacks.eps"), 8.0 / 255.0);
  EXPECT_EQ(kv.get_int("missing", 3), 3);
  EXPECT_THROW(kv.get_int("name"), FormatError);
  EXPECT_THROW(kv.get_string("absent"), FormatError);
  EXPECT_THROW(KeyValueFile::parse("a = 1\na = 2\n"), FormatError);
  EXPECT_THROW(KeyValueFile::parse("just words\n"), FormatError);
  EXPECT_THROW(KeyValueFile::parse("s = \"unterminated\\\"\n"), FormatError);
  const std::string tricky = "quote \" backslash \\ newline \n tab \t";
  KeyValueFile w;
  w.set("k", KeyValueFile::quote(tricky));
  EXPECT_EQ(KeyValueFile::parse(w.to_string()).get_string("k"), tricky);
}

}  // namespace
}  // namespace robust1d
