#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexcue/conjecture.hpp"
#include "lexcue/corpus.hpp"
#include "lexcue/cues.hpp"
#include "lexcue/error.hpp"
#include "lexcue/linmodel.hpp"
#include "lexcue/lm.hpp"
#include "lexcue/metrics.hpp"
#include "lexcue/parallel.hpp"
#include "lexcue/phenomscore.hpp"
#include "lexcue/textpipe.hpp"

namespace lexcue {

// ---------------------------------------------------------------------------
// Unigram classifier

struct UnigramModel {
  TfidfModel tfidf;
  LogisticModel model;
};

/// Fits TF-IDF and logistic regression on `train` only.
inline UnigramModel train_unigram(const Corpus& train_c, const Stoplist& stoplist,
                                  const TrainOptions& opt) {
  std::vector<TokenSeq> docs;
  docs.reserve(train_c.size());
  for (const auto& r : train_c.records()) docs.push_back(tokenize(r.text, stoplist));
  UnigramModel um;
  um.tfidf = fit_tfidf(docs);
  std::vector<SparseVector> X;
  std::vector<Label> y;
  X.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    X.push_back(vectorize(docs[i], um.tfidf));
    y.push_back(train_c.records()[i].label);
  }
  um.model = train(X, y, um.tfidf.size(), opt);
  return um;
}

inline Metrics evaluate_unigram(const UnigramModel& um, const Corpus& test,
                                const Stoplist& stoplist) {
  std::vector<Label> pred, gold;
  for (const auto& r : test.records()) {
    pred.push_back(predict_label(um.model, vectorize(tokenize(r.text, stoplist), um.tfidf)));
    gold.push_back(r.label);
  }
  return compute_metrics(std::span<const Label>(pred), std::span<const Label>(gold));
}

// ---------------------------------------------------------------------------
// Cross-validation and cue extraction

struct CvOptions {
  TrainOptions train;
  std::size_t topk = 25;
  double alpha = 0.05;
  Stoplist stoplist = default_stoplist();
  std::string stoplist_hash = default_stoplist_hash();
  std::size_t parallelism = 1;
};

struct FoldResult {
  std::size_t fold = 0;
  Metrics metrics;
  FoldCueList cues;
  UnigramModel model;
};

struct CvResult {
  Metrics mean;
  std::vector<FoldResult> folds;
  CueSet cues;  // may be empty; see stable_cues for the strict variant

  std::vector<FoldCueList> fold_cue_lists() const {
    std::vector<FoldCueList> out;
    for (const auto& f : folds) out.push_back(f.cues);
    return out;
  }
};

/// Per fold: fit TF-IDF and the model on the training part, score the test
/// part, extract top-k Wald-significant cues. Returns fold-mean metrics and
/// the cross-fold intersection of cues.
inline CvResult run_cv(const Corpus& corpus, const FoldPlan& folds, const CvOptions& opt = {}) {
  for (const auto& r : corpus.records())
    if (!folds.assignments.count(r.id))
      throw Error("fold plan does not cover review '" + r.id + "'");
  CvResult out;
  out.folds.resize(folds.k);
  bounded_for(folds.k, opt.parallelism, [&](std::size_t f) {
    try {
      auto [train_c, test_c] = folds.split(corpus, f);
      FoldResult fr;
      fr.fold = f;
      fr.model = train_unigram(train_c, opt.stoplist, opt.train);
      fr.metrics = evaluate_unigram(fr.model, test_c, opt.stoplist);
      fr.cues = extract_topk(fr.model.model, fr.model.tfidf, opt.topk, opt.alpha, f);
      out.folds[f] = std::move(fr);
    } catch (const std::exception& e) {
      throw Error("fold " + std::to_string(f) + ": " + e.what());
    }
  });
  std::vector<Metrics> ms;
  for (const auto& f : out.folds) ms.push_back(f.metrics);
  out.mean = mean_metrics(ms);

  CueProvenance prov{opt.topk, opt.alpha, folds.k, folds.seed, opt.stoplist_hash};
  try {
    out.cues = stable_cues(out.fold_cue_lists(), prov);
  } catch (const Error&) {
    out.cues = CueSet{{}, {}, prov};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-domain (train on one corpus, test on another)

enum class FeatureSet { unigram, phenomena, both };

inline std::string_view to_string(FeatureSet f) {
  switch (f) {
    case FeatureSet::unigram: return "unigram";
    case FeatureSet::phenomena: return "phenomena";
    case FeatureSet::both: return "unigram+phenomena";
  }
  return "?";
}

inline FeatureSet parse_feature_set(std::string_view s) {
  if (s == "unigram") return FeatureSet::unigram;
  if (s == "phenomena") return FeatureSet::phenomena;
  if (s == "both" || s == "unigram+phenomena") return FeatureSet::both;
  throw Error("unknown feature set '" + std::string(s) + "'");
}

struct CrossDomainOptions {
  TrainOptions train;
  Stoplist stoplist = default_stoplist();
  ScoringOptions scoring;
};

struct CrossDomainResult {
  FeatureSet feature_set = FeatureSet::unigram;
  Metrics metrics;
  LogisticModel model;
  FeatureMatrix train_matrix, test_matrix;
};

inline CrossDomainResult run_crossdomain(const Corpus& train_c, const Corpus& test_c,
                                         FeatureSet fs, const std::vector<Phenomenon>& phenomena,
                                         const ScoringBackend* backend,
                                         const CrossDomainOptions& opt = {}) {
  const bool uni = fs != FeatureSet::unigram ? fs == FeatureSet::both : true;
  const std::vector<Phenomenon> none;
  const auto& ph = fs == FeatureSet::unigram ? none : phenomena;
  if (fs != FeatureSet::unigram && (phenomena.empty() || !backend))
    throw Error(std::string(to_string(fs)) + " features need phenomena and a scoring backend");

  std::optional<TfidfModel> tfidf;
  if (uni) {
    std::vector<TokenSeq> docs;
    for (const auto& r : train_c.records()) docs.push_back(tokenize(r.text, opt.stoplist));
    tfidf = fit_tfidf(docs);
  }
  const TfidfModel* tp = tfidf ? &*tfidf : nullptr;
  auto tr = build_feature_matrix(train_c, ph, backend, uni, tp, &opt.stoplist, opt.scoring);
  auto te = build_feature_matrix(test_c, ph, backend, uni, tp, &opt.stoplist, opt.scoring);
  if (!ph.empty()) std::tie(tr, te) = standardize(std::move(tr), std::move(te));

  CrossDomainResult out;
  out.feature_set = fs;
  out.model = train(tr.rows, tr.labels, tr.n_cols(), opt.train);
  std::vector<Label> pred;
  for (const auto& row : te.rows) pred.push_back(predict_label(out.model, row));
  out.metrics = compute_metrics(std::span<const Label>(pred), std::span<const Label>(te.labels));
  out.train_matrix = std::move(tr);
  out.test_matrix = std::move(te);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline constexpr int kReportSchemaVersion = 1;

struct ReportRow {
  std::string condition;
  Metrics metrics;
};

struct ExperimentReport {
  std::string id;
  std::string title;
  nlohmann::json config = nlohmann::json::object();
  std::vector<ReportRow> rows;
  std::map<std::string, std::string> artifacts;  // name -> path (relative to out_dir or absolute)
};

inline nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) rows.push_back({{"condition", row.condition}, {"metrics", to_json(row.metrics)}});
  return {{"schema_version", kReportSchemaVersion},
          {"id", r.id},
          {"title", r.title},
          {"config", r.config},
          {"rows", rows},
          {"artifacts", r.artifacts}};
}

inline std::string report_markdown(const ExperimentReport& r) {
  std::string out = "# " + (r.title.empty() ? r.id : r.title) + "\n\n";
  out += "| Condition | Acc. | Prec. | Recall | F1 |\n";
  out += "|---|---|---|---|---|\n";
  char buf[160];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, " | %.4f | %.4f | %.4f | %.4f |\n", row.metrics.accuracy,
                  row.metrics.precision, row.metrics.recall, row.metrics.f1);
    out += "| " + row.condition + buf;
  }
  bool abstain = false;
  for (const auto& row : r.rows) abstain = abstain || row.metrics.n_abstain > 0;
  if (abstain) {
    out += "\nAbstentions (scored as errors):";
    for (const auto& row : r.rows) out += " " + row.condition + "=" + std::to_string(row.metrics.n_abstain);
    out += "\n";
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

struct EmittedReport {
  std::filesystem::path json_path, markdown_path;
};

/// Writes <out_dir>/<id>.json and <id>.md. Every referenced artifact must
/// exist; nothing is written otherwise.
inline EmittedReport emit_report(const ExperimentReport& r, const std::filesystem::path& out_dir) {
  if (r.id.empty()) throw Error("report id must not be empty");
  for (const auto& [name, p] : r.artifacts) {
    std::filesystem::path ap(p);
    if (ap.is_relative()) ap = out_dir / ap;
    if (!std::filesystem::exists(ap))
      throw Error("report artifact '" + name + "' not found: " + ap.string());
  }
  EmittedReport er{out_dir / (r.id + ".json"), out_dir / (r.id + ".md")};
  write_text_file(er.json_path, to_json(r).dump(2) + "\n");
  write_text_file(er.markdown_path, report_markdown(r));
  return er;
}

}  // namespace lexcue
