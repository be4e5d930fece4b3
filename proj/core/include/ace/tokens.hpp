#pragma once

#include <functional>
#include <string_view>

namespace ace {

/// Counts prompt tokens for a piece of text. Must be deterministic and
/// monotone: counting a string plus a non-empty suffix never yields less.
using TokenCounter = std::function<int(std::string_view)>;

/// Model-agnostic proxy counter: words (split on whitespace and punctuation)
/// scaled by 4/3, rounded up. Swap in an exact tokenizer via TokenCounter
/// when one is available for the target model.
TokenCounter default_token_counter();

/// Raw word count under the same splitting rule, exposed for tests.
int word_count(std::string_view text);

}  // namespace ace
