#include <gtest/gtest.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "robust1d/data.hpp"
#include "robust1d/errors.hpp"
#include "robust1d/ops.hpp"
#include "robust1d/text_attacks.hpp"
#include "robust1d/training.hpp"

namespace robust1d {
namespace {

// Softmax of a single forward pass, computed here rather than by the library.
double oracle_prob(const Classifier& model, const Tensor& encoded, std::size_t y) {
  Tape tape;
  const Shape s = encoded.shape();
  const ForwardResult r = model.forward(tape, tape.constant(encoded.reshaped({1, s[0], s[1]})));
  const Tensor& z = r.logits.value();
  double mx = z[0];
  for (std::size_t j = 1; j < z.size(); ++j) mx = std::max(mx, z[j]);
  double total = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) total += std::exp(z[j] - mx);
  return std::exp(z[y] - mx) / total;
}

struct Trained {
  TextDataset data;
  AlphabetCodec codec{128};
  TrainedModel tm;
};

// A tiny Char-CNN trained briefly on the synthetic corpus, shared by the tests.
const Trained& trained() {
  static const Trained t = [] {
    Trained out;
    out.data = synth_text_dataset(3, 40, 5);
    TextTask task(out.data, out.codec);
    LossConfig loss;
    loss.kind = LossKind::CrossEntropy;
    out.tm = make_trained_model(task, Profile::Tiny, loss, 6);
    TrainSettings s;
    s.epochs = 3;
    s.seed = 7;
    train(out.tm, task, nullptr, s);
    return out;
  }();
  return t;
}

// Small enough for finite differences over every input entry.
CharCnnModel small_model(std::uint64_t seed) {
  CharCnnConfig c;
  c.length = 16;
  c.convs = {{4, 3, 2}};
  c.hidden = {6};
  c.num_classes = 3;
  return CharCnnModel(c, seed);
}

CharCnnModel zero_model() {
  CharCnnModel m(CharCnnConfig::tiny(3), 1);
  for (auto& [name, t] : m.parameters()) t = Tensor(t.shape());
  return m;
}

TEST(Tokenize, SpansCoverWords) {
  const auto t = TokenizedText::parse("  hello,  world\tfoo \n");
  ASSERT_EQ(t.words, (std::vector<std::string>{"hello,", "world", "foo"}));
  EXPECT_EQ(t.spans[0], (WordSpan{2, 8}));
  EXPECT_EQ(t.spans[2], (WordSpan{16, 19}));
  EXPECT_EQ(t.joined(), "hello, world foo");
  EXPECT_TRUE(TokenizedText::parse(" \t ").words.empty());
}

TEST(Transforms, Examples) {
  EXPECT_EQ(apply_transform_at("text", Transform::Swap, 1).word, "txet");
  EXPECT_EQ(apply_transform_at("spam", Transform::Delete, 0).word, "pam");
  EXPECT_EQ(apply_transform_at("spam", Transform::Substitute, 0, 'x').word, "xpam");
  EXPECT_EQ(apply_transform_at("spam", Transform::Insert, 4, 'x').word, "spamx");
  // A swap of equal letters or a substitute by the same letter is no edit.
  EXPECT_FALSE(apply_transform_at("book", Transform::Swap, 1).changed);
  EXPECT_FALSE(apply_transform_at("Spam", Transform::Substitute, 0, 's').changed);
  EXPECT_FALSE(apply_transform_at("a", Transform::Swap, 0).changed);
  EXPECT_FALSE(apply_transform_at("", Transform::Delete, 0).changed);

  Rng rng(1);
  const auto inserted = apply_transform("", Transform::Insert, rng);
  EXPECT_TRUE(inserted.changed);
  EXPECT_EQ(inserted.word.size(), 1u);
}

TEST(Transforms, RandomEditsAreSingleEdits) {
  Rng rng(2);
  const std::string letters = "abcdefghijklmnopqrstuvwxyz";
  for (int trial = 0; trial < 2000; ++trial) {
    std::string w;
    const std::size_t n = rng.index(8);
    for (std::size_t i = 0; i < n; ++i) w += letters[rng.index(3)];
    const auto t = static_cast<Transform>(rng.index(4));
    const auto r = apply_transform(w, t, rng);
    if (!r.changed) {
      EXPECT_EQ(r.word, w);
      continue;
    }
    switch (t) {
      case Transform::Substitute: {
        ASSERT_EQ(r.word.size(), w.size());
        std::size_t diffs = 0;
        for (std::size_t i = 0; i < w.size(); ++i) diffs += r.word[i] != w[i];
        EXPECT_EQ(diffs, 1u);
        break;
      }
      case Transform::Swap: {
        ASSERT_EQ(r.word.size(), w.size());
        std::vector<std::size_t> at;
        for (std::size_t i = 0; i < w.size(); ++i)
          if (r.word[i] != w[i]) at.push_back(i);
        ASSERT_EQ(at.size(), 2u);
        EXPECT_EQ(at[1], at[0] + 1);
        EXPECT_EQ(r.word[at[0]], w[at[1]]);
        break;
      }
      case Transform::Delete:
        EXPECT_EQ(r.word.size() + 1, w.size());
        break;
      case Transform::Insert:
        EXPECT_EQ(r.word.size(), w.size() + 1);
        break;
    }
  }
}

TEST(Scoring, HeadAndTailScoresTelescope) {
  const auto& t = trained();
  const auto& model = *t.tm.model;
  const Tensor empty(t.codec.shape());
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto& rec = t.data.records[rng.index(t.data.size())];
    const auto text = TokenizedText::parse(rec.text);
    const std::size_t y = rec.label - 1;
    const double full = oracle_prob(model, t.codec.encode(rec.text), y);
    const double none = oracle_prob(model, empty, y);
    const auto ths = score_ths(model, t.codec, text, y);
    const auto tts = score_tts(model, t.codec, text, y);
    double sh = 0.0, st = 0.0;
    for (double v : ths) sh += v;
    for (double v : tts) st += v;
    EXPECT_NEAR(sh, full - none, 1e-9);
    EXPECT_NEAR(st, full - none, 1e-9);
  }
}

TEST(Scoring, MatchDirectDefinitions) {
  const auto& t = trained();
  const auto& model = *t.tm.model;
  const auto& rec = t.data.records[0];
  const auto text = TokenizedText::parse(rec.text);
  const std::size_t y = rec.label - 1;
  const double full = oracle_prob(model, t.codec.encode(rec.text), y);

  const auto r1s = score_r1s(model, t.codec, text, y);
  const auto tts = score_tts(model, t.codec, text, y);
  ASSERT_EQ(r1s.size(), text.words.size());
  for (std::size_t i = 0; i < text.words.size(); ++i) {
    // Characters outside the alphabet encode as zero rows.
    std::string replaced = rec.text;
    for (std::size_t c = text.spans[i].begin; c < text.spans[i].end; ++c) replaced[c] = '\x01';
    EXPECT_NEAR(r1s[i], full - oracle_prob(model, t.codec.encode(replaced), y), 1e-12);

    const std::string from_i = rec.text.substr(text.spans[i].begin);
    const std::string from_next = i + 1 < text.words.size() ? rec.text.substr(text.spans[i + 1].begin) : "";
    EXPECT_NEAR(tts[i], oracle_prob(model, t.codec.encode(from_i), y) - oracle_prob(model, t.codec.encode(from_next), y),
                1e-12);
  }
}

TEST(Scoring, CombinedIsExactSum) {
  const auto& t = trained();
  const auto& rec = t.data.records[3];
  const auto text = TokenizedText::parse(rec.text);
  const std::size_t y = rec.label - 1;
  const auto ths = score_ths(*t.tm.model, t.codec, text, y);
  const auto tts = score_tts(*t.tm.model, t.codec, text, y);
  DiscreteAttackSpec spec;
  spec.scoring = Scoring::Combined;
  const auto cs = score_words(*t.tm.model, t.codec, cross_entropy_objective(), text, y, spec, 0);
  ASSERT_EQ(cs.size(), ths.size());
  for (std::size_t i = 0; i < cs.size(); ++i) EXPECT_EQ(cs[i], ths[i] + tts[i]);
  EXPECT_THROW(score_combined(ths, {1.0}, 1.0), ShapeError);

  // Reading the text backwards is not the same as scoring tails.
  std::vector<double> reversed(ths.rbegin(), ths.rend());
  EXPECT_NE(tts, reversed);
  EXPECT_NE(tts, ths);
}

TEST(Scoring, ConstantModelScoresZero) {
  const CharCnnModel model = zero_model();
  const AlphabetCodec codec(128);
  const auto text = TokenizedText::parse("the quick brown fox jumps");
  for (std::size_t y = 0; y < 3; ++y) {
    for (const auto& s : {score_r1s(model, codec, text, y), score_ths(model, codec, text, y),
                          score_tts(model, codec, text, y),
                          score_gradient(model, codec, cross_entropy_objective(), text, y)}) {
      ASSERT_EQ(s.size(), 5u);
      for (double v : s) EXPECT_EQ(v, 0.0);
    }
  }
}

TEST(Scoring, GradientScoreMatchesFiniteDifferences) {
  const CharCnnModel model = small_model(4);
  const AlphabetCodec codec(16);
  const std::string raw = "ab cde f";
  const auto text = TokenizedText::parse(raw);
  const std::size_t y = 1;
  const Tensor x = codec.encode(raw);
  auto loss_at = [&](const Tensor& in) {
    Tape tape;
    const ForwardResult r = model.forward(tape, tape.constant(in.reshaped({1, 16, codec.alphabet_size()})));
    const std::size_t labels[] = {y};
    return losses::cross_entropy(r.logits, labels).value()[0];
  };
  std::vector<double> expected(text.words.size(), 0.0);
  for (std::size_t w = 0; w < text.words.size(); ++w) {
    for (std::size_t c = text.spans[w].begin; c < text.spans[w].end; ++c) {
      double sq = 0.0;
      for (std::size_t a = 0; a < codec.alphabet_size(); ++a) {
        Tensor up = x, down = x;
        up.at(c, a) += 1e-6;
        down.at(c, a) -= 1e-6;
        const double g = (loss_at(up) - loss_at(down)) / 2e-6;
        sq += g * g;
      }
      expected[w] += std::sqrt(sq);
    }
  }
  const auto got = score_gradient(model, codec, cross_entropy_objective(), text, y);
  for (std::size_t w = 0; w < got.size(); ++w) EXPECT_NEAR(got[w], expected[w], 1e-6 * std::max(1.0, expected[w]));
}

TEST(Scoring, RandomRankingFollowsSeed) {
  EXPECT_EQ(score_random(12, 5), score_random(12, 5));
  EXPECT_NE(rank_words(score_random(12, 5)), rank_words(score_random(12, 6)));
  auto order = rank_words(score_random(12, 5));
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(order[i], i);
  EXPECT_EQ(rank_words({0.5, 2.0, 0.5, -1.0}), (std::vector<std::size_t>{1, 0, 2, 3}));
}

// Reconstructs the adversarial text from the original and checks that every
// modified word is one edit away and nothing else changed.
void expect_valid_attack(const std::string& original, const AdversarialText& adv, std::size_t budget) {
  const auto before = TokenizedText::parse(original);
  ASSERT_EQ(adv.words.size(), before.words.size());
  EXPECT_LE(adv.modified.size(), budget);
  EXPECT_EQ(adv.edits, adv.modified.size());
  const std::set<std::size_t> modified(adv.modified.begin(), adv.modified.end());
  EXPECT_EQ(modified.size(), adv.modified.size());
  std::string rebuilt;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < before.words.size(); ++i) {
    const std::string& a = before.words[i];
    const std::string& b = adv.words[i];
    if (!modified.count(i)) {
      EXPECT_EQ(a, b);
    } else {
      // One substitution, adjacent swap, deletion or insertion.
      const long diff = static_cast<long>(b.size()) - static_cast<long>(a.size());
      bool one_edit = false;
      if (diff == 0) {
        std::vector<std::size_t> at;
        for (std::size_t k = 0; k < a.size(); ++k)
          if (a[k] != b[k]) at.push_back(k);
        one_edit = at.size() == 1 ||
                   (at.size() == 2 && at[1] == at[0] + 1 && a[at[0]] == b[at[1]] && a[at[1]] == b[at[0]]);
      } else {
        const std::string& longer = diff > 0 ? b : a;
        const std::string& shorter = diff > 0 ? a : b;
        if (longer.size() == shorter.size() + 1) {
          for (std::size_t k = 0; k < longer.size() && !one_edit; ++k) {
            one_edit = longer.substr(0, k) + longer.substr(k + 1) == shorter;
          }
        }
      }
      EXPECT_TRUE(one_edit) << a << " -> " << b;
    }
    rebuilt += original.substr(cursor, before.spans[i].begin - cursor) + b;
    cursor = before.spans[i].end;
  }
  rebuilt += original.substr(cursor);
  EXPECT_EQ(adv.text, rebuilt);
}

TEST(GenerateAdversarial, BudgetAndSingleEditsOverManyAttacks) {
  const CharCnnModel model = small_model(9);
  const AlphabetCodec codec(16);
  const TextDataset data = synth_text_dataset(3, 30, 8);
  Rng rng(10);
  for (int trial = 0; trial < 300; ++trial) {
    const auto& rec = data.records[rng.index(data.size())];
    DiscreteAttackSpec spec;
    spec.scoring = static_cast<Scoring>(rng.index(6));
    spec.transform = static_cast<Transform>(rng.index(4));
    spec.budget = 1 + rng.index(6);
    spec.seed = rng.next();
    const auto adv = generate_adversarial(model, codec, cross_entropy_objective(), rec.text, rec.label - 1, spec,
                                          static_cast<std::size_t>(trial));
    ASSERT_FALSE(adv.failed) << adv.error;
    expect_valid_attack(rec.text, adv, spec.budget);
    std::vector<double> p = {oracle_prob(model, codec.encode(adv.text), 0), oracle_prob(model, codec.encode(adv.text), 1),
                             oracle_prob(model, codec.encode(adv.text), 2)};
    const auto predicted = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    EXPECT_EQ(adv.success, predicted != rec.label - 1);
  }
}

TEST(GenerateAdversarial, MisclassifiedInputIsLeftAlone) {
  const auto& t = trained();
  const auto& model = *t.tm.model;
  const auto& rec = t.data.records[0];
  const auto probs = true_class_probs(model, t.codec, {t.codec.encode(rec.text)}, rec.label - 1);
  ASSERT_GT(probs[0], 0.0);
  // Ask for a label the model does not predict.
  const auto predicted = predict_classes(model, t.codec.encode(rec.text).reshaped({1, 128, t.codec.alphabet_size()}));
  const std::size_t wrong = (predicted[0] + 1) % 3;
  const auto adv = generate_adversarial(model, t.codec, cross_entropy_objective(), rec.text, wrong, DiscreteAttackSpec{});
  EXPECT_TRUE(adv.success);
  EXPECT_EQ(adv.edits, 0u);
  EXPECT_EQ(adv.text, rec.text);

  const auto blank = generate_adversarial(model, t.codec, cross_entropy_objective(), "", 0, DiscreteAttackSpec{});
  EXPECT_EQ(blank.text, "");
  EXPECT_EQ(blank.edits, 0u);
}

TEST(GenerateAdversarial, DeterministicAndIndependentOfBatching) {
  const auto& t = trained();
  std::vector<std::string> texts;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 12; ++i) {
    texts.push_back(t.data.records[i * 9].text);
    labels.push_back(t.data.records[i * 9].label - 1);
  }
  DiscreteAttackSpec spec;
  spec.scoring = Scoring::Random;
  spec.transform = Transform::Swap;
  spec.budget = 4;
  spec.seed = 44;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto a = generate_adversarial_batch(*t.tm.model, t.codec, cross_entropy_objective(), texts, labels, spec);
  omp_set_num_threads(4);
  const auto b = generate_adversarial_batch(*t.tm.model, t.codec, cross_entropy_objective(), texts, labels, spec);
  omp_set_num_threads(saved);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].text, b[i].text);
    EXPECT_EQ(a[i].modified, b[i].modified);
    const auto alone = generate_adversarial(*t.tm.model, t.codec, cross_entropy_objective(), texts[i], labels[i], spec, i);
    EXPECT_EQ(alone.text, a[i].text);
  }
}

TEST(GenerateAdversarial, SearchNeverRaisesAccuracy) {
  const auto& t = trained();
  TextTask task(t.data, t.codec);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < t.data.size(); i += 4) rows.push_back(i);
  AttackSpec attack = AttackSpec::parse("text:score=r1s,transform=substitute,budget=3");
  const Tensor adv = task.adversarial_inputs(*t.tm.model, cross_entropy_objective(), rows, attack, 0);
  const auto clean_pred = predict_classes(*t.tm.model, task.inputs(rows));
  const auto adv_pred = predict_classes(*t.tm.model, adv);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (clean_pred[i] != task.labels()[rows[i]]) EXPECT_NE(adv_pred[i], task.labels()[rows[i]]);
  }
}

TEST(DiscreteSpec, ValidationAndNames) {
  DiscreteAttackSpec spec;
  EXPECT_EQ(spec.describe(), "text:score=r1s,transform=substitute,budget=30");
  spec.budget = 0;
  EXPECT_THROW(spec.validate(), ContractViolation);
  for (auto s : {Scoring::Random, Scoring::Gradient, Scoring::R1S, Scoring::THS, Scoring::TTS, Scoring::Combined})
    EXPECT_EQ(parse_scoring(to_string(s)), s);
  for (auto t : {Transform::Swap, Transform::Substitute, Transform::Delete, Transform::Insert})
    EXPECT_EQ(parse_transform(to_string(t)), t);
  EXPECT_THROW(parse_scoring("nope"), ContractViolation);
}

}  // namespace
}  // namespace robust1d
