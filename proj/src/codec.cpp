#include "robust1d/codec.hpp"

#include <algorithm>

#include "robust1d/errors.hpp"

namespace robust1d {

AlphabetCodec::AlphabetCodec(std::size_t length, std::string alphabet, bool fold_case, bool reverse)
    : length_(length), alphabet_(std::move(alphabet)), fold_case_(fold_case), reverse_(reverse) {
  if (length_ == 0) throw ContractViolation("codec: sequence length must be positive");
  if (alphabet_.empty()) throw ContractViolation("codec: alphabet must not be empty");
  lookup_.fill(-1);
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    auto& slot = lookup_[static_cast<unsigned char>(alphabet_[i])];
    if (slot != -1) throw ContractViolation(std::string("codec: duplicate alphabet symbol '") + alphabet_[i] + "'");
    slot = static_cast<int>(i);
  }
}

std::optional<std::size_t> AlphabetCodec::index_of(char c) const {
  unsigned char u = static_cast<unsigned char>(c);
  if (fold_case_ && u >= 'A' && u <= 'Z') u = static_cast<unsigned char>(u - 'A' + 'a');
  const int idx = lookup_[u];
  if (idx < 0) return std::nullopt;
  return static_cast<std::size_t>(idx);
}

std::optional<std::size_t> AlphabetCodec::row_of(std::size_t char_index, std::size_t text_size) const {
  const std::size_t n = std::min(text_size, length_);
  if (char_index >= n) return std::nullopt;
  return reverse_ ? n - 1 - char_index : char_index;
}

void AlphabetCodec::encode_into(std::string_view text, std::span<double> rows) const {
  const std::size_t a = alphabet_.size();
  if (rows.size() != length_ * a) throw ShapeError("codec: output buffer has wrong size");
  const std::size_t n = std::min(text.size(), length_);
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = index_of(text[i]);
    if (!idx) continue;
    rows[*row_of(i, text.size()) * a + *idx] = 1.0;
  }
}

Tensor AlphabetCodec::encode(std::string_view text) const {
  Tensor out(shape());
  encode_into(text, out.data());
  return out;
}

}  // namespace robust1d
