#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "robust1d/tensor.hpp"

namespace robust1d {

/// Lowercase letters, digits, the 32 ASCII punctuation marks, space and newline.
inline constexpr std::string_view kDefaultAlphabet =
    "abcdefghijklmnopqrstuvwxyz0123456789-,;.!?:'\"/\\|_@#$%^&*~`+=<>()[]{} \n";

/// One-hot quantization of text into a fixed window of L rows, one row per
/// character. Characters outside the alphabet (and unused rows) are zero.
class AlphabetCodec {
 public:
  explicit AlphabetCodec(std::size_t length = 1014, std::string alphabet = std::string(kDefaultAlphabet),
                         bool fold_case = true, bool reverse = false);

  /// [length x alphabet_size]. Text beyond `length` characters is truncated.
  Tensor encode(std::string_view text) const;
  /// Writes the encoding into `rows`, which must hold length*alphabet_size zeros.
  void encode_into(std::string_view text, std::span<double> rows) const;

  std::optional<std::size_t> index_of(char c) const;
  /// Row holding character `char_index` of a text of `text_size` characters,
  /// or nothing if the character falls outside the window.
  std::optional<std::size_t> row_of(std::size_t char_index, std::size_t text_size) const;

  std::size_t length() const { return length_; }
  std::size_t alphabet_size() const { return alphabet_.size(); }
  const std::string& alphabet() const { return alphabet_; }
  bool fold_case() const { return fold_case_; }
  bool reverse() const { return reverse_; }
  Shape shape() const { return {length_, alphabet_.size()}; }

 private:
  std::size_t length_;
  std::string alphabet_;
  bool fold_case_;
  bool reverse_;
  std::array<int, 256> lookup_{};
};

}  // namespace robust1d
