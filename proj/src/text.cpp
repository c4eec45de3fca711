#include "fashionrec/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace fashionrec {

namespace {

// Sorted for binary search.
constexpr std::array<std::string_view, 96> kStopwords = {
    "a",     "about", "above",  "after", "again", "all",   "also",  "am",    "an",    "and",
    "any",   "are",   "as",     "at",    "be",    "been",  "being", "but",   "by",    "can",
    "could", "did",   "do",     "does",  "for",   "from",  "had",   "has",   "have",  "he",
    "her",   "here",  "him",    "his",   "how",   "i",     "if",    "in",    "into",  "is",
    "it",    "its",   "just",   "like",  "me",    "more",  "most",  "my",    "no",    "nor",
    "not",   "of",    "off",    "on",    "one",   "or",    "our",   "out",   "over",  "own",
    "really", "s",    "she",    "should", "so",   "some",  "such",  "than",  "that",  "the",
    "their", "them",  "then",   "there", "these", "they",  "this",  "those", "to",    "too",
    "up",    "very",  "was",    "we",    "well",  "were",  "what",  "when",  "which", "while",
    "who",   "will",  "with",   "would", "you",   "your"};

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

bool is_stopword(std::string_view word) {
  return std::binary_search(kStopwords.begin(), kStopwords.end(), word);
}

std::vector<std::string> content_words(std::string_view text) {
  auto words = tokenize_words(text);
  std::erase_if(words, [](const std::string& w) { return is_stopword(w); });
  return words;
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace fashionrec
