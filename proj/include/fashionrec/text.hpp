#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fashionrec {

// Lowercased ASCII alphanumeric runs; every other byte separates words.
std::vector<std::string> tokenize_words(std::string_view text);

bool is_stopword(std::string_view word);

// tokenize_words with stopwords dropped.
std::vector<std::string> content_words(std::string_view text);

// Whitespace-separated tokens.
std::vector<std::string> whitespace_tokens(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace fashionrec
