#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lexcue/error.hpp"
#include "lexcue/stoplist.hpp"

namespace lexcue {

using TokenSeq = std::vector<std::string>;

namespace unicode {

/// Decodes one UTF-8 code point starting at s[i] and advances i.
/// Malformed bytes decode to U+FFFD and consume a single byte.
inline char32_t decode(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = (b0 & 0xE0) == 0xC0 ? 2 : (b0 & 0xF0) == 0xE0 ? 3
            : (b0 & 0xF8) == 0xF0 ? 4 : 0;
  char32_t cp = len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
  for (int k = 1; k < len; ++k) {
    int c = cont(k);
    if (c < 0) {
      len = 0;
      break;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  if (len == 0) {
    ++i;
    return 0xFFFD;
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

inline void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Lowercasing and letter classification cover ASCII, Latin-1, Latin
// Extended-A/B, Greek, Cyrillic and the CJK/kana blocks. That is enough for
// review corpora and keeps tokenization independent of the process locale.

inline char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0xC0) return c;
  if ((c >= 0xC0 && c <= 0xDE && c != 0xD7)) return c + 32;
  if (c >= 0x100 && c <= 0x137) return c | 1;
  if (c >= 0x139 && c <= 0x148) return (c & 1) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return c | 1;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E) return (c & 1) ? c + 1 : c;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

inline bool is_alnum(char32_t c) {
  if (c < 0x80)
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
           (c >= 'A' && c <= 'Z');
  if (c == 0xAA || c == 0xB5 || c == 0xBA) return true;
  if (c >= 0xC0 && c <= 0x24F) return c != 0xD7 && c != 0xF7;
  if (c >= 0x370 && c <= 0x3FF) return c != 0x37E && c != 0x387;
  if (c >= 0x400 && c <= 0x52F) return !(c >= 0x482 && c <= 0x489);
  if (c >= 0x3040 && c <= 0x9FFF) return c >= 0x3041;
  if (c >= 0xAC00 && c <= 0xD7A3) return true;
  return false;
}

}  // namespace unicode

/// Lowercased maximal runs of at least `min_len` alphanumeric code points.
inline TokenSeq word_tokens(std::string_view text, std::size_t min_len) {
  TokenSeq out;
  std::string cur;
  std::size_t cur_len = 0;
  auto flush = [&] {
    if (cur_len >= min_len && cur_len > 0) out.push_back(cur);
    cur.clear();
    cur_len = 0;
  };
  for (std::size_t i = 0; i < text.size();) {
    char32_t cp = unicode::decode(text, i);
    if (unicode::is_alnum(cp)) {
      unicode::encode(unicode::to_lower(cp), cur);
      ++cur_len;
    } else {
      flush();
    }
  }
  flush();
  return out;
}

/// Classification tokenizer: lowercase, runs of >= 2 alphanumerics, stop
/// words removed, order preserved.
inline TokenSeq tokenize(std::string_view text, const Stoplist& stoplist) {
  TokenSeq toks = word_tokens(text, 2);
  std::erase_if(toks, [&](const std::string& t) { return stoplist.count(t) > 0; });
  return toks;
}

/// Sparse row vector: strictly increasing column indices, no zero values.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t nnz() const { return index.size(); }
  bool empty() const { return index.empty(); }

  double get(std::uint32_t col) const {
    auto it = std::lower_bound(index.begin(), index.end(), col);
    if (it == index.end() || *it != col) return 0.0;
    return value[static_cast<std::size_t>(it - index.begin())];
  }
  double norm() const {
    double s = 0.0;
    for (double v : value) s += v * v;
    return std::sqrt(s);
  }
  void push(std::uint32_t col, double v) {
    if (v == 0.0) return;
    index.push_back(col);
    value.push_back(v);
  }

  bool operator==(const SparseVector&) const = default;
};

/// Unigram TF-IDF model: raw counts, smoothed idf, L2-normalized rows.
class TfidfModel {
 public:
  TfidfModel() = default;

  TfidfModel(std::vector<std::string> terms, std::vector<std::size_t> df,
             std::size_t n_docs)
      : terms_(std::move(terms)), df_(std::move(df)), n_docs_(n_docs) {
    require(terms_.size() == df_.size(), "tfidf: terms/df length mismatch");
    require(std::is_sorted(terms_.begin(), terms_.end()),
            "tfidf: terms must be sorted");
    idf_.reserve(terms_.size());
    for (std::size_t j = 0; j < terms_.size(); ++j) {
      require(df_[j] >= 1 && df_[j] <= n_docs_, "tfidf: df out of range");
      index_.emplace(terms_[j], static_cast<std::uint32_t>(j));
      idf_.push_back(idf_formula(n_docs_, df_[j]));
    }
  }

  static double idf_formula(std::size_t n_docs, std::size_t df) {
    return std::log((1.0 + static_cast<double>(n_docs)) /
                    (1.0 + static_cast<double>(df))) +
           1.0;
  }

  std::size_t size() const { return terms_.size(); }
  std::size_t n_docs() const { return n_docs_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::string& term(std::size_t j) const { return terms_[j]; }
  std::size_t df(std::size_t j) const { return df_[j]; }
  double idf(std::size_t j) const { return idf_[j]; }

  std::optional<std::uint32_t> column(const std::string& term) const {
    auto it = index_.find(term);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  nlohmann::json to_json() const {
    return {{"terms", terms_}, {"df", df_}, {"n_docs", n_docs_}};
  }
  static TfidfModel from_json(const nlohmann::json& j) {
    return TfidfModel(j.at("terms").get<std::vector<std::string>>(),
                      j.at("df").get<std::vector<std::size_t>>(),
                      j.at("n_docs").get<std::size_t>());
  }

  bool operator==(const TfidfModel& o) const {
    return terms_ == o.terms_ && df_ == o.df_ && n_docs_ == o.n_docs_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::size_t n_docs_ = 0;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

inline TfidfModel fit_tfidf(const std::vector<TokenSeq>& train_docs) {
  if (train_docs.empty()) throw Error("fit_tfidf: no training documents");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : train_docs) {
    TokenSeq uniq = doc;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto& t : uniq) ++df[t];
  }
  if (df.empty()) throw Error("fit_tfidf: every training document is empty");
  std::vector<std::string> terms;
  std::vector<std::size_t> counts;
  terms.reserve(df.size());
  counts.reserve(df.size());
  for (auto& [t, n] : df) {
    terms.push_back(t);
    counts.push_back(n);
  }
  return TfidfModel(std::move(terms), std::move(counts), train_docs.size());
}

inline SparseVector vectorize(const TokenSeq& doc, const TfidfModel& model) {
  std::map<std::uint32_t, double> counts;
  for (const auto& t : doc)
    if (auto col = model.column(t)) counts[*col] += 1.0;
  SparseVector v;
  double ss = 0.0;
  for (auto& [col, c] : counts) {
    double w = c * model.idf(col);
    v.push(col, w);
    ss += w * w;
  }
  if (ss > 0.0) {
    const double inv = 1.0 / std::sqrt(ss);
    for (double& x : v.value) x *= inv;
  }
  return v;
}

}  // namespace lexcue
