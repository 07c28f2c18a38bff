#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_set>

#include "lexcue/error.hpp"
#include "lexcue/hash.hpp"

namespace lexcue {

using Stoplist = std::unordered_set<std::string>;

// English stop words, mirrored byte-for-byte in data/stopwords_en.txt
// (one word per line). The test suite checks that both copies hash equal.
inline constexpr std::string_view kDefaultStopwords[] = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you",
    "you're", "you've", "you'll", "you'd", "your", "yours", "yourself",
    "yourselves", "he", "him", "his", "himself", "she", "she's", "her", "hers",
    "herself", "it", "it's", "its", "itself", "they", "them", "their",
    "theirs", "themselves", "what", "which", "who", "whom", "this", "that",
    "that'll", "these", "those", "am", "is", "are", "was", "were", "be",
    "been", "being", "have", "has", "had", "having", "do", "does", "did",
    "doing", "a", "an", "the", "and", "but", "if", "or", "because", "as",
    "until", "while", "of", "at", "by", "for", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above",
    "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
    "under", "again", "further", "then", "once", "here", "there", "when",
    "where", "why", "how", "all", "any", "both", "each", "few", "more", "most",
    "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so",
    "than", "too", "very", "s", "t", "can", "will", "just", "don", "don't",
    "should", "should've", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain",
    "aren", "aren't", "couldn", "couldn't", "didn", "didn't", "doesn",
    "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
    "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn",
    "needn't", "shan", "shan't", "shouldn", "shouldn't", "wasn", "wasn't",
    "weren", "weren't", "won", "won't", "wouldn", "wouldn't"};

/// Canonical serialization: one word per line, '\n'-terminated, in the
/// original file order.
inline std::string default_stoplist_text() {
  std::string out;
  for (auto w : kDefaultStopwords) {
    out += w;
    out += '\n';
  }
  return out;
}

inline Stoplist default_stoplist() {
  Stoplist s;
  for (auto w : kDefaultStopwords) s.emplace(w);
  return s;
}

inline std::string default_stoplist_hash() {
  return sha256_hex(default_stoplist_text());
}

/// Reads a stop list file: one lowercase word per line; blank lines ignored.
inline Stoplist load_stoplist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stop list " + path.string());
  Stoplist out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

}  // namespace lexcue
