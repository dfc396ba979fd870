#include "parade/tokenizer.hpp"

#include "parade/rng.hpp"

#include <cctype>

namespace parade {

void Vocabulary::validate() const {
  if (vocab_size < 4) throw ConfigError("vocab_size must be >= 4");
}

TokenId Vocabulary::word_id(std::string_view lowercase_word) const {
  const std::uint64_t h = fnv1a64(lowercase_word);
  return kFirstWordId +
         static_cast<TokenId>(h % static_cast<std::uint64_t>(vocab_size - kFirstWordId));
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  vocab.validate();
  TokenSequence out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(vocab.word_id(word));
      word.clear();
    }
  };
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      word.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

}  // namespace parade
