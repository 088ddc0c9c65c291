#include "pathnet/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

namespace pathnet {
namespace {

// Multi-byte UTF-8 sequences treated as punctuation.
constexpr std::array<std::string_view, 9> kUtf8Punct = {
    "\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99", "\xE2\x80\x93",
    "\xE2\x80\x94", "\xE2\x80\xA6", "\xC2\xAB",     "\xC2\xBB"};

// Lowercase, without the trailing dot.
const std::unordered_set<std::string_view>& abbreviations() {
  static const std::unordered_set<std::string_view> set = {
      "mr",  "mrs", "ms",  "dr",   "prof", "st",  "jr",  "sr",  "vs",  "etc", "inc",
      "ltd", "co",  "corp", "mt",  "ft",   "no",  "approx", "dept", "est", "fig", "gen",
      "gov", "lt",  "sgt", "col",  "capt", "jan", "feb", "mar", "apr", "jun", "jul",
      "aug", "sep", "sept", "oct", "nov",  "dec", "cf",  "al",  "ca",  "vol", "pp"};
  return set;
}

// 150 function words.
constexpr std::array<std::string_view, 150> kStopwords = {
    "a",        "about",   "above",   "after",  "again",   "against", "all",     "also",
    "am",       "an",      "and",     "any",    "are",     "as",      "at",      "be",
    "because",  "been",    "before",  "being",  "below",   "between", "both",    "but",
    "by",       "can",     "could",   "did",    "do",      "does",    "doing",   "down",
    "during",   "each",    "either",  "else",   "ever",    "every",   "few",     "for",
    "from",     "further", "had",     "has",    "have",    "having",  "he",      "her",
    "here",     "hers",    "herself", "him",    "himself", "his",     "how",     "however",
    "i",        "if",      "in",      "into",   "is",      "it",      "its",     "itself",
    "just",     "may",     "me",      "might",  "more",    "most",    "much",    "must",
    "my",       "myself",  "neither", "no",     "nor",     "not",     "now",     "of",
    "off",      "often",   "on",      "once",   "only",    "or",      "other",   "our",
    "ours",     "ourselves", "out",   "over",   "own",     "same",    "shall",   "she",
    "should",   "since",   "so",      "some",   "such",    "than",    "that",    "the",
    "their",    "theirs",  "them",    "themselves", "then", "there",  "these",   "they",
    "this",     "those",   "through", "thus",   "to",      "too",     "under",   "until",
    "up",       "upon",    "us",      "very",   "was",     "we",      "were",    "what",
    "when",     "where",   "whether", "which",  "while",   "who",     "whom",    "whose",
    "why",      "will",    "with",    "within", "without", "would",   "yet",     "you",
    "your",     "yours",   "yourself", "yourselves", "'s", "s"};

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

std::size_t utf8_punct_len(std::string_view s, std::size_t i) {
  for (auto p : kUtf8Punct) {
    if (s.substr(i, p.size()) == p) return p.size();
  }
  return 0;
}

bool is_word_byte(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  if (std::isalnum(c) || c == '_') return true;
  return c >= 0x80 && utf8_punct_len(s, i) == 0;
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

// Length of a dotted acronym such as "U.K." starting at i, or 0.
std::size_t acronym_len(std::string_view s, std::size_t i) {
  std::size_t j = i;
  int letters = 0;
  while (j + 1 < s.size() && is_alpha(s[j]) && s[j + 1] == '.') {
    j += 2;
    ++letters;
  }
  if (letters < 2) return 0;
  // "U.K.based" would be ambiguous; require the acronym to end the word.
  if (j < s.size() && is_word_byte(s, j)) return 0;
  return j - i;
}

std::size_t word_len(std::string_view s, std::size_t i) {
  std::size_t j = i;
  while (j < s.size()) {
    if (is_word_byte(s, j)) {
      ++j;
      continue;
    }
    // 3.5 and 1,000 stay whole.
    if ((s[j] == '.' || s[j] == ',') && j > i && is_digit(s[j - 1]) && j + 1 < s.size() &&
        is_digit(s[j + 1])) {
      ++j;
      continue;
    }
    break;
  }
  return j - i;
}

void push(std::vector<Token>& out, std::string_view text, std::size_t offset, std::size_t len) {
  Token t;
  t.text = std::string(text.substr(offset, len));
  t.lowercase = ascii_lower(t.text);
  t.char_offset = offset;
  out.push_back(std::move(t));
}

bool is_terminal(const Token& t) {
  return t.text == "." || t.text == "!" || t.text == "?" || t.text == "\xE2\x80\xA6";
}

bool is_closing(const Token& t) {
  return t.text == "\"" || t.text == "'" || t.text == ")" || t.text == "]" ||
         t.text == "\xE2\x80\x9D" || t.text == "\xE2\x80\x99";
}

}  // namespace

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string normalize_key(std::string_view surface) {
  std::string out;
  out.reserve(surface.size());
  bool pending_space = false;
  for (char c : surface) {
    if (is_space(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (is_space(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    const bool chunk_start = i == 0 || is_space(static_cast<unsigned char>(text[i - 1]));

    if (is_word_byte(text, i)) {
      if (std::size_t a = acronym_len(text, i); a > 0) {
        push(out, text, i, a);
        i += a;
        continue;
      }
      std::size_t len = word_len(text, i);
      const bool dot_follows = i + len < n && text[i + len] == '.';
      if (dot_follows) {
        const std::string lower = ascii_lower(text.substr(i, len));
        const bool known = abbreviations().count(lower) > 0;
        // Single capital initial after a capitalized word, as in "Stephen R. Donaldson".
        const bool initial = len == 1 && std::isupper(static_cast<unsigned char>(text[i])) &&
                             !out.empty() && is_capitalized(out.back()) &&
                             !is_terminal(out.back());
        if (known || initial) len += 1;
      }
      push(out, text, i, len);
      i += len;
      continue;
    }

    // Clitic: apostrophe glued to the previous word, followed by letters.
    if ((text[i] == '\'') && !chunk_start && i > 0 && is_word_byte(text, i - 1) &&
        i + 1 < n && is_alpha(text[i + 1])) {
      const std::size_t len = 1 + word_len(text, i + 1);
      push(out, text, i, len);
      i += len;
      continue;
    }

    std::size_t plen = utf8_punct_len(text, i);
    if (plen == 0) {
      // Any other byte is a single punctuation token; keep stray UTF-8 lead
      // bytes together with their continuation bytes.
      plen = 1;
      while (i + plen < n && (static_cast<unsigned char>(text[i + plen]) & 0xC0) == 0x80 &&
             static_cast<unsigned char>(text[i]) >= 0x80) {
        ++plen;
      }
    }
    push(out, text, i, plen);
    i += plen;
  }
  return out;
}

std::vector<TokenRange> segment_sentences(const std::vector<Token>& tokens) {
  std::vector<TokenRange> out;
  std::size_t begin = 0;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (!is_terminal(tokens[i])) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    while (end < tokens.size() && (is_terminal(tokens[end]) || is_closing(tokens[end]))) ++end;
    out.push_back({begin, end});
    begin = end;
    i = end;
  }
  if (begin < tokens.size()) out.push_back({begin, tokens.size()});
  return out;
}

std::string join_tokens(const std::vector<Token>& tokens, TokenRange range) {
  std::string out;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    if (i > range.begin) out.push_back(' ');
    out += tokens[i].text;
  }
  return out;
}

std::string join_tokens(const std::vector<Token>& tokens) {
  return join_tokens(tokens, {0, tokens.size()});
}

bool is_stopword(std::string_view lowercase_word) {
  static const std::unordered_set<std::string_view> set(kStopwords.begin(), kStopwords.end());
  return set.count(lowercase_word) > 0;
}

const std::vector<std::string_view>& stopword_list() {
  static const std::vector<std::string_view> list(kStopwords.begin(), kStopwords.end());
  return list;
}

bool is_punctuation(const Token& token) {
  return std::none_of(token.text.begin(), token.text.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_';
  }) && !(static_cast<unsigned char>(token.text.front()) >= 0x80 &&
          utf8_punct_len(token.text, 0) == 0);
}

bool is_capitalized(const Token& token) {
  return !token.text.empty() && std::isupper(static_cast<unsigned char>(token.text.front()));
}

}  // namespace pathnet
