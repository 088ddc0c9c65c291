#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace pathnet {

struct Token {
  std::string text;
  std::string lowercase;
  std::size_t char_offset = 0;

  bool operator==(const Token&) const = default;
};

/// Half-open token range [begin, end).
struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const TokenRange&) const = default;
};

/// Rule-based tokenizer. Every non-whitespace byte of `text` belongs to
/// exactly one token, and each token is the substring
/// text[char_offset, char_offset + token.text.size()).
std::vector<Token> tokenize(std::string_view text);

/// Splits after '.', '!' and '?' tokens. Abbreviations keep their dot inside
/// the word token, so they never produce a boundary.
std::vector<TokenRange> segment_sentences(const std::vector<Token>& tokens);

std::string ascii_lower(std::string_view s);

/// Case-folded, whitespace-collapsed form used to link mentions.
std::string normalize_key(std::string_view surface);

/// Joins token texts with single spaces.
std::string join_tokens(const std::vector<Token>& tokens, TokenRange range);
std::string join_tokens(const std::vector<Token>& tokens);

bool is_stopword(std::string_view lowercase_word);
const std::vector<std::string_view>& stopword_list();

/// True when the token carries no letter or digit.
bool is_punctuation(const Token& token);
bool is_capitalized(const Token& token);

}  // namespace pathnet
