#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexcue/error.hpp"
#include "lexcue/label.hpp"
#include "lexcue/linmodel.hpp"

namespace lexcue {

struct CueTerm {
  std::string term;
  double beta = 0.0;
  double p = 1.0;

  bool operator==(const CueTerm&) const = default;
};

/// Top-k significant terms per label for one cross-validation fold.
struct FoldCueList {
  std::size_t fold = 0;
  std::size_t k = 0;
  double alpha = 0.05;
  std::map<Label, std::vector<CueTerm>> per_label;
  /// Labels for which fewer than k terms survived the Wald filter.
  std::vector<Label> short_labels;

  std::set<std::string> terms(Label l) const {
    std::set<std::string> out;
    if (auto it = per_label.find(l); it != per_label.end())
      for (const auto& c : it->second) out.insert(c.term);
    return out;
  }
};

struct CueProvenance {
  std::size_t k = 0;
  double alpha = 0.05;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  std::string stoplist_hash;

  bool operator==(const CueProvenance&) const = default;
};

/// Terms that made the same label's top-k list in every fold.
struct CueSet {
  std::set<std::string> genuine;
  std::set<std::string> deceptive;
  CueProvenance provenance;

  const std::set<std::string>& of(Label l) const {
    return l == Label::deceptive ? deceptive : genuine;
  }
  std::size_t size() const { return genuine.size() + deceptive.size(); }

  bool operator==(const CueSet&) const = default;
};

/// Per label, the k largest-|beta| terms of the matching sign with Wald p <= alpha.
/// Ties on |beta| are broken lexicographically by term.
inline FoldCueList extract_topk(const std::vector<WaldStat>& stats, std::size_t k,
                                double alpha, std::size_t fold = 0) {
  if (k < 1) throw Error("extract_topk: k must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("extract_topk: alpha must be in (0,1)");
  FoldCueList out;
  out.fold = fold;
  out.k = k;
  out.alpha = alpha;
  for (Label l : kLabels) {
    std::vector<CueTerm> cands;
    for (const auto& s : stats) {
      const bool sign_ok = l == Label::deceptive ? s.beta > 0.0 : s.beta < 0.0;
      if (sign_ok && s.p <= alpha) cands.push_back({s.term, s.beta, s.p});
    }
    std::sort(cands.begin(), cands.end(), [](const CueTerm& a, const CueTerm& b) {
      const double ma = std::abs(a.beta), mb = std::abs(b.beta);
      if (ma != mb) return ma > mb;
      return a.term < b.term;
    });
    if (cands.size() < k) out.short_labels.push_back(l);
    if (cands.size() > k) cands.resize(k);
    out.per_label[l] = std::move(cands);
  }
  return out;
}

inline FoldCueList extract_topk(const LogisticModel& model, const TfidfModel& vocab,
                                std::size_t k, double alpha, std::size_t fold = 0) {
  return extract_topk(wald_stats(model, vocab), k, alpha, fold);
}

inline CueSet stable_cues(const std::vector<FoldCueList>& fold_lists,
                          CueProvenance provenance = {}) {
  if (fold_lists.empty()) throw Error("stable_cues: no fold lists");
  const auto k = fold_lists.front().k;
  const auto alpha = fold_lists.front().alpha;
  for (const auto& f : fold_lists)
    if (f.k != k || f.alpha != alpha)
      throw Error("stable_cues: folds used different k or alpha");
  CueSet out;
  for (Label l : kLabels) {
    std::set<std::string> acc = fold_lists.front().terms(l);
    for (std::size_t i = 1; i < fold_lists.size(); ++i) {
      auto other = fold_lists[i].terms(l);
      std::set<std::string> next;
      std::set_intersection(acc.begin(), acc.end(), other.begin(), other.end(),
                            std::inserter(next, next.end()));
      acc = std::move(next);
    }
    (l == Label::deceptive ? out.deceptive : out.genuine) = std::move(acc);
  }
  if (out.size() == 0)
    throw Error("no term is stable across all " + std::to_string(fold_lists.size()) +
                " folds for either label; try a larger top-k");
  provenance.k = k;
  provenance.alpha = alpha;
  provenance.folds = fold_lists.size();
  out.provenance = std::move(provenance);
  return out;
}

inline nlohmann::json to_json(const FoldCueList& f) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [l, terms] : f.per_label) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : terms) arr.push_back({{"term", c.term}, {"beta", c.beta}, {"p", c.p}});
    per[std::string(to_string(l))] = arr;
  }
  nlohmann::json short_labels = nlohmann::json::array();
  for (Label l : f.short_labels) short_labels.push_back(to_string(l));
  return {{"fold", f.fold}, {"k", f.k}, {"alpha", f.alpha}, {"per_label", per},
          {"short_labels", short_labels}};
}

inline nlohmann::json to_json(const CueSet& c) {
  return {{"genuine", c.genuine},
          {"deceptive", c.deceptive},
          {"provenance",
           {{"k", c.provenance.k},
            {"alpha", c.provenance.alpha},
            {"folds", c.provenance.folds},
            {"seed", c.provenance.seed},
            {"stoplist_hash", c.provenance.stoplist_hash}}}};
}

inline CueSet cueset_from_json(const nlohmann::json& j) {
  CueSet c;
  c.genuine = j.at("genuine").get<std::set<std::string>>();
  c.deceptive = j.at("deceptive").get<std::set<std::string>>();
  if (j.contains("provenance")) {
    const auto& p = j["provenance"];
    c.provenance.k = p.value("k", std::size_t{0});
    c.provenance.alpha = p.value("alpha", 0.05);
    c.provenance.folds = p.value("folds", std::size_t{0});
    c.provenance.seed = p.value("seed", std::uint64_t{0});
    c.provenance.stoplist_hash = p.value("stoplist_hash", std::string{});
  }
  for (const auto& t : c.genuine)
    if (c.deceptive.count(t)) throw Error("cue set term '" + t + "' listed for both labels");
  return c;
}

}  // namespace lexcue
