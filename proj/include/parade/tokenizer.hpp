#pragma once

#include "parade/types.hpp"

#include <string>
#include <string_view>

namespace parade {

// Hash-bucket vocabulary: lowercase words map deterministically into
// [4, vocab_size) by FNV-1a, so no vocabulary file is needed and the same
// text always yields the same ids.
struct Vocabulary {
  int vocab_size = 4096;

  TokenId word_id(std::string_view lowercase_word) const;
  void validate() const;
};

// Lowercase, split on non-alphanumeric runs, hash each word into the
// vocabulary. Empty text gives an empty sequence; reserved ids are never
// produced.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);

}  // namespace parade
