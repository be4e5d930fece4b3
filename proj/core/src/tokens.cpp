#include "ace/tokens.hpp"

#include <cctype>

namespace ace {

int word_count(std::string_view text) {
  int count = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    bool word_char = std::isalnum(c) != 0;
    if (word_char && !in_word) ++count;
    in_word = word_char;
  }
  return count;
}

TokenCounter default_token_counter() {
  return [](std::string_view text) {
    // words * 4/3, rounded up
    return (word_count(text) * 4 + 2) / 3;
  };
}

}  // namespace ace
