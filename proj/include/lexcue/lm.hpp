#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "lexcue/error.hpp"
#include "lexcue/gateway.hpp"
#include "lexcue/hash.hpp"
#include "lexcue/textpipe.hpp"

namespace lexcue {

inline constexpr std::string_view kUnk = "<unk>";

/// A language model that can report log P(next token | context) over its
/// complete token set. Implementations are immutable after construction and
/// safe for concurrent reads.
class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;

  /// Backend tokenization of free text.
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;

  /// log P(target | context). Targets outside the token set are scored as
  /// <unk> when the backend has one, and rejected otherwise.
  virtual double logprob(std::span<const std::string> context,
                         const std::string& target) const = 0;

  /// True if `token` is scored as itself rather than as <unk>.
  virtual bool knows(const std::string& token) const = 0;

  /// Full token set (including <unk> when present), or empty when the
  /// backend cannot enumerate it.
  virtual std::vector<std::string> token_set() const = 0;

  /// Stable identity used for cache keys and run metadata.
  virtual std::string fingerprint() const = 0;
};

struct TokenLogprobQuery {
  std::string context;
  std::string target_token;
};

inline double next_token_logprob(const ScoringBackend& backend, const TokenLogprobQuery& q) {
  const auto ctx = backend.tokenize(q.context);
  return backend.logprob(ctx, q.target_token);
}

/// LM tokenization: lowercase alphanumeric runs, single letters kept, no stop removal.
inline std::vector<std::string> lm_tokens(std::string_view text) { return word_tokens(text, 1); }

/// Context-free probability table, for tests and toy runs.
class TableBackend : public ScoringBackend {
 public:
  explicit TableBackend(std::map<std::string, double> probs) : probs_(std::move(probs)) {
    double total = 0.0;
    for (auto& [t, p] : probs_) {
      if (!(p > 0.0 && p <= 1.0)) throw Error("table backend: probability out of (0,1] for " + t);
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error("table backend: probabilities must sum to 1");
  }

  static TableBackend uniform(const std::vector<std::string>& tokens) {
    std::map<std::string, double> m;
    for (const auto& t : tokens) m[t] = 1.0 / static_cast<double>(tokens.size());
    return TableBackend(std::move(m));
  }

  std::vector<std::string> tokenize(std::string_view text) const override { return lm_tokens(text); }

  double logprob(std::span<const std::string>, const std::string& target) const override {
    if (auto it = probs_.find(target); it != probs_.end()) return std::log(it->second);
    if (auto it = probs_.find(std::string(kUnk)); it != probs_.end()) return std::log(it->second);
    throw Error("table backend: token '" + target + "' not in table");
  }

  bool knows(const std::string& t) const override { return probs_.count(t) > 0; }

  std::vector<std::string> token_set() const override {
    std::vector<std::string> out;
    for (auto& [t, p] : probs_) out.push_back(t);
    return out;
  }

  std::string fingerprint() const override {
    return "table:" + sha256_hex(nlohmann::json(probs_).dump()).substr(0, 16);
  }

 private:
  std::map<std::string, double> probs_;
};

/// Word n-gram model with add-k smoothing over vocab + <unk>.
///
/// P(t | h) = (c(h, t) + k) / (c(h) + k V), V = |vocab| + 1, where h is the
/// last (order - 1) tokens of the history (fewer at the start of a text).
class NgramLM {
 public:
  NgramLM() = default;

  std::size_t order() const { return order_; }
  double add_k() const { return add_k_; }
  std::size_t vocab_size() const { return vocab_.size() + 1; }
  const std::vector<std::string>& vocab() const { return vocab_; }

  bool in_vocab(const std::string& t) const { return vocab_index_.count(t) > 0; }

  double prob(std::span<const std::string> history, const std::string& target) const {
    const std::string key = context_key(history);
    const std::string tok = in_vocab(target) ? target : std::string(kUnk);
    double c_ht = 0.0, c_h = 0.0;
    if (auto it = counts_.find(key); it != counts_.end()) {
      c_h = static_cast<double>(totals_.at(key));
      if (auto jt = it->second.find(tok); jt != it->second.end())
        c_ht = static_cast<double>(jt->second);
    }
    return (c_ht + add_k_) / (c_h + add_k_ * static_cast<double>(vocab_size()));
  }

  /// Canonical JSON: order, add_k, vocab, and the context -> token -> count table.
  nlohmann::json to_json() const {
    nlohmann::json table = nlohmann::json::object();
    for (const auto& [ctx, row] : counts_) table[ctx] = row;
    return {{"order", order_}, {"add_k", add_k_}, {"vocab", vocab_}, {"counts", table}};
  }

  std::string hash() const { return sha256_hex(to_json().dump()); }

  friend NgramLM fit_ngram_lm(const std::vector<std::string>& texts, std::size_t order,
                              double add_k);

  /// Context key: history tokens (already truncated) joined by a space.
  /// Out-of-vocabulary history tokens map to <unk>.
  std::string context_key(std::span<const std::string> history) const {
    const std::size_t n = std::min(history.size(), order_ - 1);
    std::string key;
    for (std::size_t i = history.size() - n; i < history.size(); ++i) {
      if (!key.empty()) key += ' ';
      key += in_vocab(history[i]) ? history[i] : std::string(kUnk);
    }
    return key;
  }

 private:
  std::size_t order_ = 1;
  double add_k_ = 1.0;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> vocab_index_;
  std::map<std::string, std::map<std::string, std::size_t>> counts_;
  std::map<std::string, std::size_t> totals_;
};

inline NgramLM fit_ngram_lm(const std::vector<std::string>& texts, std::size_t order,
                            double add_k) {
  if (texts.empty()) throw Error("fit_ngram_lm: no training texts");
  if (order < 1) throw Error("fit_ngram_lm: order must be >= 1");
  if (!(add_k > 0.0)) throw Error("fit_ngram_lm: add_k must be > 0");
  NgramLM lm;
  lm.order_ = order;
  lm.add_k_ = add_k;
  std::vector<std::vector<std::string>> docs;
  std::map<std::string, bool> vocab;
  for (const auto& t : texts) {
    docs.push_back(lm_tokens(t));
    for (const auto& tok : docs.back()) vocab[tok] = true;
  }
  if (vocab.empty()) throw Error("fit_ngram_lm: training texts contain no tokens");
  for (auto& [t, _] : vocab) {
    lm.vocab_index_.emplace(t, lm.vocab_.size());
    lm.vocab_.push_back(t);
  }
  for (const auto& doc : docs)
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const std::string key =
          lm.context_key(std::span<const std::string>(doc.data(), i));
      ++lm.counts_[key][doc[i]];
      ++lm.totals_[key];
    }
  return lm;
}

class NgramBackend : public ScoringBackend {
 public:
  explicit NgramBackend(std::shared_ptr<const NgramLM> lm) : lm_(std::move(lm)) {
    if (!lm_) throw Error("ngram backend needs a model");
  }

  std::vector<std::string> tokenize(std::string_view text) const override { return lm_tokens(text); }

  double logprob(std::span<const std::string> context, const std::string& target) const override {
    return std::log(lm_->prob(context, target));
  }

  bool knows(const std::string& t) const override { return lm_->in_vocab(t); }

  std::vector<std::string> token_set() const override {
    auto out = lm_->vocab();
    out.emplace_back(kUnk);
    return out;
  }

  std::string fingerprint() const override { return "ngram:" + lm_->hash().substr(0, 16); }

  const NgramLM& model() const { return *lm_; }

 private:
  std::shared_ptr<const NgramLM> lm_;
};

/// Interpolates a base backend with a unigram cache of the context:
/// P(t | h) = (1 - w) P_base(t | h) + w * count_h(t) / |h|.
/// The cache lets the conditioning prefix (the phenomenon statement) shift
/// probability toward its own words, which a short-history n-gram cannot do.
class PrefixCacheBackend : public ScoringBackend {
 public:
  PrefixCacheBackend(std::shared_ptr<const ScoringBackend> base, double weight)
      : base_(std::move(base)), weight_(weight) {
    if (!base_) throw Error("cache backend needs a base backend");
    if (!(weight >= 0.0 && weight < 1.0)) throw Error("cache weight must be in [0, 1)");
  }

  std::vector<std::string> tokenize(std::string_view text) const override {
    return base_->tokenize(text);
  }

  double logprob(std::span<const std::string> context, const std::string& target) const override {
    const double pb = std::exp(base_->logprob(context, target));
    if (context.empty() || weight_ == 0.0) return std::log(pb);
    // Cache entries are compared in the base token set, so OOV words share <unk>.
    const bool target_known = base_->knows(target);
    std::size_t hits = 0;
    for (const auto& c : context) {
      const bool known = base_->knows(c);
      if (target_known ? (known && c == target) : !known) ++hits;
    }
    const double pc = static_cast<double>(hits) / static_cast<double>(context.size());
    return std::log((1.0 - weight_) * pb + weight_ * pc);
  }

  bool knows(const std::string& t) const override { return base_->knows(t); }
  std::vector<std::string> token_set() const override { return base_->token_set(); }

  std::string fingerprint() const override {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", weight_);
    return "cache(" + std::string(buf) + "):" + base_->fingerprint();
  }

 private:
  std::shared_ptr<const ScoringBackend> base_;
  double weight_;
};

/// Routes each query to a per-phenomenon model, chosen by which phenomenon
/// statement appears in the context. Used for planted-signal checks and for
/// users who have per-phenomenon reference text.
class ConditionedBackend : public ScoringBackend {
 public:
  ConditionedBackend(std::vector<std::pair<std::string, std::shared_ptr<const ScoringBackend>>> parts,
                     std::shared_ptr<const ScoringBackend> fallback)
      : fallback_(std::move(fallback)) {
    if (!fallback_) throw Error("conditioned backend needs a fallback");
    for (auto& [statement, be] : parts) {
      auto toks = lm_tokens(statement);
      if (toks.empty()) throw Error("conditioned backend: empty statement");
      parts_.push_back({std::move(toks), std::move(be)});
    }
  }

  std::vector<std::string> tokenize(std::string_view text) const override { return lm_tokens(text); }

  double logprob(std::span<const std::string> context, const std::string& target) const override {
    return route(context).logprob(context, target);
  }

  bool knows(const std::string& t) const override { return fallback_->knows(t); }
  std::vector<std::string> token_set() const override { return fallback_->token_set(); }

  std::string fingerprint() const override {
    std::string fp = "conditioned:" + fallback_->fingerprint();
    for (const auto& p : parts_) {
      std::string joined;
      for (const auto& t : p.statement) joined += t + ' ';
      fp += "|" + sha256_hex(joined).substr(0, 8) + "=" + p.backend->fingerprint();
    }
    return sha256_hex(fp).substr(0, 24);
  }

 private:
  struct Part {
    std::vector<std::string> statement;
    std::shared_ptr<const ScoringBackend> backend;
  };

  const ScoringBackend& route(std::span<const std::string> ctx) const {
    for (const auto& p : parts_)
      if (std::search(ctx.begin(), ctx.end(), p.statement.begin(), p.statement.end()) != ctx.end())
        return *p.backend;
    return *fallback_;
  }

  std::vector<Part> parts_;
  std::shared_ptr<const ScoringBackend> fallback_;
};

/// Client for a server exposing full next-token distributions:
///   POST <endpoint>/logprob  {"context": str, "target": str}
///   200 {"logprob": x}; 404 when the target is outside the server's vocabulary.
class RemoteLogprobBackend : public ScoringBackend {
 public:
  RemoteLogprobBackend(std::string endpoint, std::string model_id)
      : endpoint_(std::move(endpoint)), model_id_(std::move(model_id)) {
    std::tie(host_, base_path_) = split_endpoint(endpoint_);
  }

  std::vector<std::string> tokenize(std::string_view text) const override { return lm_tokens(text); }

  double logprob(std::span<const std::string> context, const std::string& target) const override {
    std::string ctx;
    for (const auto& c : context) {
      if (!ctx.empty()) ctx += ' ';
      ctx += c;
    }
    httplib::Client cli(host_);
    auto res = cli.Post(base_path_ + "/logprob",
                        nlohmann::json{{"context", ctx}, {"target", target}}.dump(),
                        "application/json");
    if (!res) throw Error("logprob server unreachable: " + httplib::to_string(res.error()));
    if (res->status == 404)
      throw Error("token '" + target + "' is outside the remote backend's vocabulary");
    if (res->status != 200)
      throw Error("logprob server returned HTTP " + std::to_string(res->status));
    double lp = nlohmann::json::parse(res->body).at("logprob").get<double>();
    if (!(lp <= 0.0)) throw Error("logprob server returned a positive log-probability");
    return lp;
  }

  bool knows(const std::string&) const override { return true; }
  std::vector<std::string> token_set() const override { return {}; }
  std::string fingerprint() const override { return "remote:" + model_id_ + "@" + endpoint_; }

 private:
  std::string endpoint_, model_id_, host_, base_path_;
};

}  // namespace lexcue
