#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lexcue/conjecture.hpp"
#include "lexcue/corpus.hpp"
#include "lexcue/error.hpp"
#include "lexcue/hash.hpp"
#include "lexcue/lm.hpp"
#include "lexcue/parallel.hpp"
#include "lexcue/textpipe.hpp"

namespace lexcue {

/// f(r, p): log P(review | phenomenon prompt) under a scoring backend.
struct ScoreRecord {
  std::string review_id;
  std::string phenomenon_id;
  double sum_logprob = 0.0;
  std::size_t n_tokens = 0;
  double mean_logprob = 0.0;
  std::size_t n_unk = 0;  // review tokens scored as <unk>

  bool operator==(const ScoreRecord&) const = default;
};

/// Conditioning prefix: "Write a hotel review that <statement>:".
inline std::string scoring_prefix(const Phenomenon& p) {
  std::string s = p.statement;
  while (!s.empty() && (s.back() == '.' || s.back() == ' ' || s.back() == ':')) s.pop_back();
  return "Write a hotel review that " + s + ":";
}

inline ScoreRecord score_review(const ScoringBackend& backend, const Phenomenon& phenomenon,
                                const ReviewRecord& review) {
  auto context = backend.tokenize(scoring_prefix(phenomenon));
  const auto tokens = backend.tokenize(review.text);
  if (tokens.empty())
    throw Error("review '" + review.id + "' has no tokens under the scoring backend");
  ScoreRecord rec{review.id, phenomenon.id, 0.0, tokens.size(), 0.0, 0};
  context.reserve(context.size() + tokens.size());
  for (const auto& tok : tokens) {
    rec.sum_logprob += backend.logprob(context, tok);
    if (!backend.knows(tok)) ++rec.n_unk;
    context.push_back(tok);
  }
  rec.mean_logprob = rec.sum_logprob / static_cast<double>(rec.n_tokens);
  return rec;
}

/// Persistent (phenomenon id, review id) -> score store for one backend.
class ScoreCache {
 public:
  ScoreCache(const std::filesystem::path& dir, const std::string& backend_fingerprint)
      : path_(dir / ("scores-" + sha256_hex(backend_fingerprint).substr(0, 16) + ".bin")) {
    std::filesystem::create_directories(dir);
    load();
  }

  std::optional<ScoreRecord> lookup(const std::string& pid, const std::string& rid) const {
    std::lock_guard lock(mu_);
    if (auto it = entries_.find({pid, rid}); it != entries_.end()) return it->second;
    return std::nullopt;
  }

  void insert(const ScoreRecord& r) {
    std::lock_guard lock(mu_);
    entries_[{r.phenomenon_id, r.review_id}] = r;
    dirty_ = true;
  }

  void save() {
    std::lock_guard lock(mu_);
    if (!dirty_) return;
    auto tmp = path_;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write score cache " + tmp.string());
      out.write(kMagic, sizeof kMagic);
      for (const auto& [key, r] : entries_) {
        put_str(out, r.phenomenon_id);
        put_str(out, r.review_id);
        put_pod(out, r.sum_logprob);
        put_pod(out, static_cast<std::uint64_t>(r.n_tokens));
        put_pod(out, static_cast<std::uint64_t>(r.n_unk));
      }
    }
    std::filesystem::rename(tmp, path_);
    dirty_ = false;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static constexpr char kMagic[8] = {'L', 'X', 'S', 'C', '0', '0', '1', '\n'};

  template <class T>
  static void put_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static void put_str(std::ofstream& out, const std::string& s) {
    put_pod(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <class T>
  static bool get_pod(std::ifstream& in, T& v) {
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
  }
  static bool get_str(std::ifstream& in, std::string& s) {
    std::uint32_t n = 0;
    if (!get_pod(in, n)) return false;
    s.resize(n);
    return static_cast<bool>(in.read(s.data(), n));
  }

  void load() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    char magic[8];
    if (!in.read(magic, 8) || std::string_view(magic, 8) != std::string_view(kMagic, 8))
      throw Error("score cache has an unknown format: " + path_.string());
    for (;;) {
      ScoreRecord r;
      std::uint64_t n = 0, unk = 0;
      if (!get_str(in, r.phenomenon_id)) break;
      if (!get_str(in, r.review_id) || !get_pod(in, r.sum_logprob) || !get_pod(in, n) ||
          !get_pod(in, unk))
        throw Error("truncated score cache: " + path_.string());
      r.n_tokens = n;
      r.n_unk = unk;
      r.mean_logprob = r.sum_logprob / static_cast<double>(n);
      entries_[{r.phenomenon_id, r.review_id}] = std::move(r);
    }
  }

  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, ScoreRecord> entries_;
  bool dirty_ = false;
};

enum class ColumnKind { unigram, phenomenon };

/// Reviews x features. Unigram columns (TF-IDF, training vocabulary) come
/// first, then one column per phenomenon holding mean token log-probability.
struct FeatureMatrix {
  std::vector<std::string> row_ids;
  std::vector<Label> labels;
  std::vector<std::string> columns;
  std::vector<ColumnKind> kinds;
  std::vector<SparseVector> rows;
  // Per-column standardization, fit on training rows (identity for unigram columns).
  std::vector<double> mean, stdev;
  bool standardized = false;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return columns.size(); }
  double at(std::size_t r, std::size_t c) const {
    return rows[r].get(static_cast<std::uint32_t>(c));
  }
};

struct ScoringOptions {
  std::size_t parallelism = 1;
  ScoreCache* cache = nullptr;
};

/// Scores every (review, phenomenon) pair; results keyed by position.
inline std::vector<std::vector<ScoreRecord>> score_corpus(const Corpus& corpus,
                                                          const std::vector<Phenomenon>& phenomena,
                                                          const ScoringBackend& backend,
                                                          const ScoringOptions& opt = {}) {
  const auto& recs = corpus.records();
  const std::size_t m = phenomena.size();
  std::vector<std::vector<ScoreRecord>> out(recs.size(), std::vector<ScoreRecord>(m));
  bounded_for(recs.size() * m, opt.parallelism, [&](std::size_t k) {
    const auto& r = recs[k / m];
    const auto& p = phenomena[k % m];
    if (opt.cache)
      if (auto hit = opt.cache->lookup(p.id, r.id)) {
        out[k / m][k % m] = *hit;
        return;
      }
    try {
      auto rec = score_review(backend, p, r);
      if (opt.cache) opt.cache->insert(rec);
      out[k / m][k % m] = std::move(rec);
    } catch (const std::exception& e) {
      throw Error("scoring review '" + r.id + "' under phenomenon " + p.id + ": " + e.what());
    }
  });
  if (opt.cache) opt.cache->save();
  return out;
}

inline FeatureMatrix build_feature_matrix(const Corpus& corpus,
                                          const std::vector<Phenomenon>& phenomena,
                                          const ScoringBackend* backend, bool include_unigrams,
                                          const TfidfModel* tfidf, const Stoplist* stoplist,
                                          const ScoringOptions& opt = {}) {
  if (include_unigrams != (tfidf != nullptr))
    throw Error("a TF-IDF model is required exactly when unigram features are included");
  if (include_unigrams && !stoplist) throw Error("unigram features need a stop list");
  if (!include_unigrams && phenomena.empty())
    throw Error("phenomena-only features need at least one phenomenon");
  if (!phenomena.empty() && !backend) throw Error("phenomenon features need a scoring backend");

  FeatureMatrix fm;
  const std::size_t vocab = include_unigrams ? tfidf->size() : 0;
  if (include_unigrams) {
    fm.columns = tfidf->terms();
    fm.kinds.assign(vocab, ColumnKind::unigram);
  }
  for (const auto& p : phenomena) {
    fm.columns.push_back(p.id);
    fm.kinds.push_back(ColumnKind::phenomenon);
  }
  std::vector<std::vector<ScoreRecord>> scores;
  if (!phenomena.empty()) scores = score_corpus(corpus, phenomena, *backend, opt);

  const auto& recs = corpus.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    fm.row_ids.push_back(recs[i].id);
    fm.labels.push_back(recs[i].label);
    SparseVector row;
    if (include_unigrams) row = vectorize(tokenize(recs[i].text, *stoplist), *tfidf);
    for (std::size_t j = 0; j < phenomena.size(); ++j)
      row.push(static_cast<std::uint32_t>(vocab + j), scores[i][j].mean_logprob);
    fm.rows.push_back(std::move(row));
  }
  fm.mean.assign(fm.n_cols(), 0.0);
  fm.stdev.assign(fm.n_cols(), 1.0);
  return fm;
}

/// z-scores phenomenon columns with parameters (population stdev) fit on
/// `train`; constant training columns become 0 in both matrices. Unigram
/// TF-IDF columns are left as they are.
inline std::pair<FeatureMatrix, FeatureMatrix> standardize(FeatureMatrix train, FeatureMatrix test) {
  if (train.columns != test.columns || train.kinds != test.kinds)
    throw Error("standardize: train and test column specs differ");
  if (train.n_rows() == 0) throw Error("standardize: empty training matrix");
  const std::size_t nc = train.n_cols();
  std::vector<double> mean(nc, 0.0), sd(nc, 1.0);
  std::vector<bool> constant(nc, false);
  const double n = static_cast<double>(train.n_rows());
  for (std::size_t c = 0; c < nc; ++c) {
    if (train.kinds[c] != ColumnKind::phenomenon) continue;
    double s = 0.0;
    for (std::size_t r = 0; r < train.n_rows(); ++r) s += train.at(r, c);
    mean[c] = s / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < train.n_rows(); ++r) {
      const double d = train.at(r, c) - mean[c];
      ss += d * d;
    }
    sd[c] = std::sqrt(ss / n);
    constant[c] = !(sd[c] > 1e-12 * std::max(1.0, std::abs(mean[c])));
  }
  std::vector<std::uint32_t> phen_cols;
  for (std::size_t c = 0; c < nc; ++c)
    if (train.kinds[c] == ColumnKind::phenomenon && !constant[c])
      phen_cols.push_back(static_cast<std::uint32_t>(c));
  auto apply = [&](FeatureMatrix& fm) {
    for (auto& row : fm.rows) {
      // Unigram entries keep their sparsity; phenomenon columns are dense
      // (an absent entry is a raw score of 0, not a missing value).
      std::vector<std::pair<std::uint32_t, double>> cells;
      for (std::size_t k = 0; k < row.nnz(); ++k)
        if (fm.kinds[row.index[k]] != ColumnKind::phenomenon) cells.emplace_back(row.index[k], row.value[k]);
      for (auto c : phen_cols) cells.emplace_back(c, (row.get(c) - mean[c]) / sd[c]);
      std::sort(cells.begin(), cells.end());
      SparseVector out;
      for (const auto& [c, v] : cells) out.push(c, v);
      row = std::move(out);
    }
    fm.mean = mean;
    fm.stdev = sd;
    fm.standardized = true;
  };
  apply(train);
  apply(test);
  return {std::move(train), std::move(test)};
}

inline std::string feature_matrix_to_csv(const FeatureMatrix& fm) {
  std::string out = "review_id";
  for (const auto& c : fm.columns) out += "," + c;
  out += '\n';
  char buf[32];
  for (std::size_t r = 0; r < fm.n_rows(); ++r) {
    out += fm.row_ids[r];
    std::vector<double> dense(fm.n_cols(), 0.0);
    for (std::size_t k = 0; k < fm.rows[r].nnz(); ++k) dense[fm.rows[r].index[k]] = fm.rows[r].value[k];
    for (double v : dense) {
      if (v == 0.0) {
        out += ",0";
        continue;
      }
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace lexcue
