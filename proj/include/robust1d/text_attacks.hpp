#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "robust1d/codec.hpp"
#include "robust1d/objective.hpp"

namespace robust1d {

/// Half-open character range [begin, end) of a word in its source text.
struct WordSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const WordSpan&) const = default;
};

/// A text split into maximal runs of non-whitespace.
struct TokenizedText {
  std::string original;
  std::vector<std::string> words;
  std::vector<WordSpan> spans;

  static TokenizedText parse(std::string text);
  /// Words joined by single spaces.
  std::string joined() const;
};

enum class Scoring { Random, Gradient, R1S, THS, TTS, Combined };
enum class Transform { Swap, Substitute, Delete, Insert };

std::string to_string(Scoring s);
std::string to_string(Transform t);
Scoring parse_scoring(const std::string& s);
Transform parse_transform(const std::string& s);

struct DiscreteAttackSpec {
  Scoring scoring = Scoring::R1S;
  Transform transform = Transform::Substitute;
  /// Maximum number of modified words.
  std::size_t budget = 30;
  /// Weight of the tail score in Scoring::Combined.
  double lambda = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  /// e.g. "text:score=r1s,transform=substitute,budget=30"
  std::string describe() const;
};

/// Softmax probability of class y for each text, evaluated in batches.
std::vector<double> true_class_probs(const Classifier& model, const AlphabetCodec& codec,
                                     const std::vector<Tensor>& inputs, std::size_t y);

/// F(text) - F(text with word i's rows zeroed).
std::vector<double> score_r1s(const Classifier& model, const AlphabetCodec& codec, const TokenizedText& text,
                              std::size_t y);
/// F(prefix through word i) - F(prefix through word i-1); everything after the
/// prefix is zero rows, and the empty prefix is the all-zero input.
std::vector<double> score_ths(const Classifier& model, const AlphabetCodec& codec, const TokenizedText& text,
                              std::size_t y);
/// F(suffix from word i) - F(suffix from word i+1), suffixes re-encoded from
/// the first row.
std::vector<double> score_tts(const Classifier& model, const AlphabetCodec& codec, const TokenizedText& text,
                              std::size_t y);
/// ths + lambda * tts
std::vector<double> score_combined(const std::vector<double>& ths, const std::vector<double>& tts, double lambda);
/// Sum over a word's characters of the L2 norm of the loss gradient with
/// respect to that character's one-hot row. Throws NumericError if the
/// gradient is not finite.
std::vector<double> score_gradient(const Classifier& model, const AlphabetCodec& codec, const AttackLoss& loss,
                                   const TokenizedText& text, std::size_t y);
/// A seeded random ranking: the first word of the permutation scores highest.
std::vector<double> score_random(std::size_t num_words, std::uint64_t seed);

/// Scores for spec.scoring. `seed` feeds Scoring::Random only.
std::vector<double> score_words(const Classifier& model, const AlphabetCodec& codec, const AttackLoss& loss,
                                const TokenizedText& text, std::size_t y, const DiscreteAttackSpec& spec,
                                std::uint64_t seed);

/// Word indices by descending score; ties go to the lower index.
std::vector<std::size_t> rank_words(const std::vector<double>& scores);

struct TransformResult {
  std::string word;
  /// False when the transform's precondition failed and the word is unchanged.
  bool changed = false;
};

/// One character edit at a seeded position. Substitute and Insert draw
/// lowercase letters; a substitute letter always differs from the case-folded
/// original, and Swap only picks adjacent characters that differ.
TransformResult apply_transform(const std::string& word, Transform transform, Rng& rng);
/// The same edit at a fixed position. `letter` is used by Substitute and Insert.
TransformResult apply_transform_at(const std::string& word, Transform transform, std::size_t position,
                                   char letter = 'x');

struct AdversarialText {
  std::string text;
  /// Words after editing, aligned with the original word list.
  std::vector<std::string> words;
  std::vector<std::size_t> modified;
  std::size_t edits = 0;
  /// The model misclassifies the returned text.
  bool success = false;
  /// Scoring hit a non-finite gradient; the text is returned unchanged.
  bool failed = false;
  std::string error;
};

/// Edits words in ranked order, one transform each, until the prediction
/// changes or the budget is spent. `sample_index` selects the per-sample
/// random stream.
AdversarialText generate_adversarial(const Classifier& model, const AlphabetCodec& codec, const AttackLoss& loss,
                                     const std::string& text, std::size_t y, const DiscreteAttackSpec& spec,
                                     std::size_t sample_index = 0);

/// generate_adversarial over a corpus, parallel over samples. Numeric
/// failures are recorded per sample; other errors propagate.
std::vector<AdversarialText> generate_adversarial_batch(const Classifier& model, const AlphabetCodec& codec,
                                                        const AttackLoss& loss, const std::vector<std::string>& texts,
                                                        const std::vector<std::size_t>& labels,
                                                        const DiscreteAttackSpec& spec);

}  // namespace robust1d
