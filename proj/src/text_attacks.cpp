#include "robust1d/text_attacks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>

#include "robust1d/errors.hpp"
#include "robust1d/format.hpp"

namespace robust1d {

namespace {

constexpr std::size_t kScoreBatch = 64;
constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
char fold(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

void zero_chars(const AlphabetCodec& codec, Tensor& encoded, std::size_t text_size, std::size_t begin,
                std::size_t end) {
  const std::size_t a = codec.alphabet_size();
  for (std::size_t j = begin; j < end; ++j) {
    const auto row = codec.row_of(j, text_size);
    if (!row) continue;
    std::fill_n(encoded.data().begin() + static_cast<std::ptrdiff_t>(*row * a), a, 0.0);
  }
}

std::size_t argmax_prediction(const Classifier& model, const AlphabetCodec& codec, const std::string& text) {
  return predict_classes(model, codec.encode(text).reshaped({1, codec.length(), codec.alphabet_size()}))[0];
}

char random_letter_except(char avoid, Rng& rng) {
  const char folded = fold(avoid);
  const bool is_letter = kLetters.find(folded) != std::string_view::npos;
  char c = kLetters[rng.index(is_letter ? kLetters.size() - 1 : kLetters.size())];
  if (is_letter && c >= folded) c = static_cast<char>(c + 1);
  return c;
}

}  // namespace

TokenizedText TokenizedText::parse(std::string text) {
  TokenizedText t;
  t.original = std::move(text);
  const std::string& s = t.original;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    if (i == s.size()) break;
    const std::size_t begin = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    t.spans.push_back({begin, i});
    t.words.push_back(s.substr(begin, i - begin));
  }
  return t;
}

std::string TokenizedText::joined() const {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

std::string to_string(Scoring s) {
  switch (s) {
    case Scoring::Random: return "random";
    case Scoring::Gradient: return "gradient";
    case Scoring::R1S: return "r1s";
    case Scoring::THS: return "ths";
    case Scoring::TTS: return "tts";
    case Scoring::Combined: return "combined";
  }
  return "?";
}

std::string to_string(Transform t) {
  switch (t) {
    case Transform::Swap: return "swap";
    case Transform::Substitute: return "substitute";
    case Transform::Delete: return "delete";
    case Transform::Insert: return "insert";
  }
  return "?";
}

Scoring parse_scoring(const std::string& s) {
  for (auto v : {Scoring::Random, Scoring::Gradient, Scoring::R1S, Scoring::THS, Scoring::TTS, Scoring::Combined}) {
    if (to_string(v) == s) return v;
  }
  throw ContractViolation("unknown scoring '" + s + "'");
}

Transform parse_transform(const std::string& s) {
  for (auto v : {Transform::Swap, Transform::Substitute, Transform::Delete, Transform::Insert}) {
    if (to_string(v) == s) return v;
  }
  throw ContractViolation("unknown transform '" + s + "'");
}

void DiscreteAttackSpec::validate() const {
  if (budget < 1) throw ContractViolation("text attack budget must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ContractViolation("lambda must be finite and >= 0");
}

std::string DiscreteAttackSpec::describe() const {
  std::string s = "text:score=" + to_string(scoring) + ",transform=" + to_string(transform) +
                  ",budget=" + std::to_string(budget);
  if (scoring == Scoring::Combined) s += ",lambda=" + format_double(lambda);
  return s;
}

std::vector<double> true_class_probs(const Classifier& model, const AlphabetCodec& codec,
                                     const std::vector<Tensor>& inputs, std::size_t y) {
  if (y >= model.num_classes()) throw ContractViolation("class index out of range");
  const std::size_t rows = codec.length(), a = codec.alphabet_size(), per = rows * a;
  std::vector<double> out;
  out.reserve(inputs.size());
  for (std::size_t begin = 0; begin < inputs.size(); begin += kScoreBatch) {
    const std::size_t count = std::min(kScoreBatch, inputs.size() - begin);
    Tensor batch({count, rows, a});
    for (std::size_t i = 0; i < count; ++i) {
      const Tensor& x = inputs[begin + i];
      if (x.size() != per) throw ShapeError("scoring input has shape " + shape_string(x.shape()));
      std::copy(x.data().begin(), x.data().end(), batch.data().begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    const Tensor p = predict_probabilities(model, batch);
    for (std::size_t i = 0; i < count; ++i) out.push_back(p.at(i, y));
  }
  return out;
}

std::vector<double> score_r1s(const Classifier& model, const AlphabetCodec& codec, const TokenizedText& text,
                              std::size_t y) {
  const std::size_t n = text.words.size();
  const Tensor full = codec.encode(text.original);
  std::vector<Tensor> inputs{full};
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x = full;
    zero_chars(codec, x, text.original.size(), text.spans[i].begin, text.spans[i].end);
    inputs.push_back(std::move(x));
  }
  const auto f = true_class_probs(model, codec, inputs, y);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = f[0] - f[i + 1];
  return scores;
}

std::vector<double> score_ths(const Classifier& model, const AlphabetCodec& codec, const TokenizedText& text,
                              std::size_t y) {
  // prefix[k] keeps every character before word k (k = 0..n); the last
  // prefix is the whole text, the first is all zeros.
  const std::size_t n = text.words.size(), size = text.original.size();
  const Tensor full = codec.encode(text.original);
  std::vector<Tensor> prefixes;
  for (std::size_t k = 0; k <= n; ++k) {
    Tensor x = full;
    const std::size_t cut = k == 0 ? 0 : (k < n ? text.spans[k].begin : size);
    zero_chars(codec, x, size, cut, size);
    prefixes.push_back(std::move(x));
  }
  const auto f = true_class_probs(model, codec, prefixes, y);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = f[i + 1] - f[i];
  return scores;
}

std::vector<double> score_tts(const Classifier& model, const AlphabetCodec& codec, const TokenizedText& text,
                              std::size_t y) {
  // suffix[k] starts at word k (the first suffix is the whole text); suffix[n]
  // is empty.
  const std::size_t n = text.words.size();
  std::vector<Tensor> suffixes;
  for (std::size_t k = 0; k <= n; ++k) {
    const std::size_t from = k == 0 ? 0 : (k < n ? text.spans[k].begin : text.original.size());
    suffixes.push_back(codec.encode(std::string_view(text.original).substr(from)));
  }
  const auto f = true_class_probs(model, codec, suffixes, y);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = f[i] - f[i + 1];
  return scores;
}

std::vector<double> score_combined(const std::vector<double>& ths, const std::vector<double>& tts, double lambda) {
  if (ths.size() != tts.size()) {
    throw ShapeError("combined scoring needs equal lengths, got " + std::to_string(ths.size()) + " and " +
                     std::to_string(tts.size()));
  }
  std::vector<double> out(ths.size());
  for (std::size_t i = 0; i < ths.size(); ++i) out[i] = ths[i] + lambda * tts[i];
  return out;
}

std::vector<double> score_gradient(const Classifier& model, const AlphabetCodec& codec, const AttackLoss& loss,
                                   const TokenizedText& text, std::size_t y) {
  if (y >= model.num_classes()) throw ContractViolation("class index out of range");
  const std::size_t a = codec.alphabet_size();
  Tape tape;
  const Var input = tape.leaf(codec.encode(text.original).reshaped({1, codec.length(), a}));
  const ForwardResult r = model.forward(tape, input);
  const std::vector<std::size_t> labels{y};
  tape.backward(loss(tape, r, labels));
  const auto g = tape.grad(input);

  std::vector<double> row_norm(codec.length(), 0.0);
  for (std::size_t row = 0; row < codec.length(); ++row) {
    double s = 0.0;
    for (std::size_t j = 0; j < a; ++j) s += g[row * a + j] * g[row * a + j];
    if (!std::isfinite(s)) throw NumericError("gradient scoring: non-finite input gradient");
    row_norm[row] = std::sqrt(s);
  }
  std::vector<double> scores(text.words.size(), 0.0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = text.spans[i].begin; j < text.spans[i].end; ++j) {
      if (const auto row = codec.row_of(j, text.original.size())) scores[i] += row_norm[*row];
    }
  }
  return scores;
}

std::vector<double> score_random(std::size_t num_words, std::uint64_t seed) {
  Rng rng(seed);
  const auto perm = rng.permutation(num_words);
  std::vector<double> scores(num_words);
  for (std::size_t k = 0; k < num_words; ++k) scores[perm[k]] = static_cast<double>(num_words - k);
  return scores;
}

std::vector<double> score_words(const Classifier& model, const AlphabetCodec& codec, const AttackLoss& loss,
                                const TokenizedText& text, std::size_t y, const DiscreteAttackSpec& spec,
                                std::uint64_t seed) {
  switch (spec.scoring) {
    case Scoring::Random: return score_random(text.words.size(), seed);
    case Scoring::Gradient: return score_gradient(model, codec, loss, text, y);
    case Scoring::R1S: return score_r1s(model, codec, text, y);
    case Scoring::THS: return score_ths(model, codec, text, y);
    case Scoring::TTS: return score_tts(model, codec, text, y);
    case Scoring::Combined:
      return score_combined(score_ths(model, codec, text, y), score_tts(model, codec, text, y), spec.lambda);
  }
  throw ContractViolation("unknown scoring");
}

std::vector<std::size_t> rank_words(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

TransformResult apply_transform_at(const std::string& word, Transform transform, std::size_t position, char letter) {
  std::string w = word;
  switch (transform) {
    case Transform::Swap:
      if (position + 1 >= w.size() || fold(w[position]) == fold(w[position + 1])) return {word, false};
      std::swap(w[position], w[position + 1]);
      return {w, true};
    case Transform::Substitute:
      if (position >= w.size() || fold(w[position]) == fold(letter)) return {word, false};
      w[position] = letter;
      return {w, true};
    case Transform::Delete:
      if (position >= w.size()) return {word, false};
      w.erase(position, 1);
      return {w, true};
    case Transform::Insert:
      if (position > w.size()) return {word, false};
      w.insert(position, 1, letter);
      return {w, true};
  }
  return {word, false};
}

TransformResult apply_transform(const std::string& word, Transform transform, Rng& rng) {
  switch (transform) {
    case Transform::Swap: {
      std::vector<std::size_t> candidates;
      for (std::size_t p = 0; p + 1 < word.size(); ++p) {
        if (fold(word[p]) != fold(word[p + 1])) candidates.push_back(p);
      }
      if (candidates.empty()) return {word, false};
      return apply_transform_at(word, transform, candidates[rng.index(candidates.size())]);
    }
    case Transform::Substitute: {
      if (word.empty()) return {word, false};
      const std::size_t p = rng.index(word.size());
      return apply_transform_at(word, transform, p, random_letter_except(word[p], rng));
    }
    case Transform::Delete:
      if (word.empty()) return {word, false};
      return apply_transform_at(word, transform, rng.index(word.size()));
    case Transform::Insert: {
      const std::size_t p = rng.index(word.size() + 1);
      return apply_transform_at(word, transform, p, kLetters[rng.index(kLetters.size())]);
    }
  }
  return {word, false};
}

namespace {

std::string assemble(const TokenizedText& t, const std::vector<std::string>& words) {
  std::string out;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    out.append(t.original, cursor, t.spans[i].begin - cursor);
    out += words[i];
    cursor = t.spans[i].end;
  }
  out.append(t.original, cursor, std::string::npos);
  return out;
}

}  // namespace

AdversarialText generate_adversarial(const Classifier& model, const AlphabetCodec& codec, const AttackLoss& loss,
                                     const std::string& text, std::size_t y, const DiscreteAttackSpec& spec,
                                     std::size_t sample_index) {
  spec.validate();
  if (y >= model.num_classes()) throw ContractViolation("class index out of range");
  const TokenizedText tok = TokenizedText::parse(text);
  AdversarialText out;
  out.text = text;
  out.words = tok.words;
  if (argmax_prediction(model, codec, text) != y) {
    out.success = true;
    return out;
  }
  if (tok.words.empty()) return out;

  const std::uint64_t seed = derive_seed(spec.seed, sample_index);
  const auto order = rank_words(score_words(model, codec, loss, tok, y, spec, seed));
  Rng rng(derive_seed(seed, 1));
  for (std::size_t idx : order) {
    if (out.edits == spec.budget) break;
    const TransformResult r = apply_transform(out.words[idx], spec.transform, rng);
    if (!r.changed) continue;
    out.words[idx] = r.word;
    out.modified.push_back(idx);
    ++out.edits;
    out.text = assemble(tok, out.words);
    if (argmax_prediction(model, codec, out.text) != y) {
      out.success = true;
      break;
    }
  }
  return out;
}

std::vector<AdversarialText> generate_adversarial_batch(const Classifier& model, const AlphabetCodec& codec,
                                                        const AttackLoss& loss, const std::vector<std::string>& texts,
                                                        const std::vector<std::size_t>& labels,
                                                        const DiscreteAttackSpec& spec) {
  if (texts.size() != labels.size()) throw ShapeError("text attack needs one label per text");
  spec.validate();
  std::vector<AdversarialText> out(texts.size());
  std::vector<std::exception_ptr> errors(texts.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(texts.size()); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      out[i] = generate_adversarial(model, codec, loss, texts[i], labels[i], spec, i);
    } catch (const NumericError& e) {
      out[i].text = texts[i];
      out[i].words = TokenizedText::parse(texts[i]).words;
      out[i].failed = true;
      out[i].error = e.what();
      out[i].success = argmax_prediction(model, codec, texts[i]) != labels[i];
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace robust1d
