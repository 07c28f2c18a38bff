#pragma once

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "lexcue/error.hpp"
#include "lexcue/label.hpp"

namespace lexcue {

/// Binary classification metrics with respect to the deceptive label.
/// An abstention (no predicted label) is always a wrong prediction: it lands
/// in FN for a deceptive review and in FP for a genuine one.
struct Metrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t n_abstain = 0;
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;

  std::size_t total() const { return tp + fp + tn + fn; }

  void finalize() {
    const auto d = [](std::size_t a, std::size_t b) {
      return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
    };
    precision = d(tp, tp + fp);
    recall = d(tp, tp + fn);
    accuracy = d(tp + tn, total());
    f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  }

  bool operator==(const Metrics&) const = default;
};

inline Metrics metrics_from_confusion(std::size_t tp, std::size_t fp, std::size_t tn,
                                      std::size_t fn, std::size_t n_abstain = 0) {
  Metrics m;
  m.tp = tp, m.fp = fp, m.tn = tn, m.fn = fn, m.n_abstain = n_abstain;
  m.finalize();
  return m;
}

inline Metrics compute_metrics(std::span<const std::optional<Label>> predicted,
                               std::span<const Label> gold) {
  if (predicted.size() != gold.size())
    throw Error("compute_metrics: " + std::to_string(predicted.size()) + " predictions for " +
                std::to_string(gold.size()) + " gold labels");
  Metrics m;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool pos = gold[i] == Label::deceptive;
    if (!predicted[i]) {
      ++m.n_abstain;
      ++(pos ? m.fn : m.fp);
      continue;
    }
    const bool pred_pos = *predicted[i] == Label::deceptive;
    if (pos) ++(pred_pos ? m.tp : m.fn);
    else ++(pred_pos ? m.fp : m.tn);
  }
  m.finalize();
  return m;
}

inline Metrics compute_metrics(std::span<const Label> predicted, std::span<const Label> gold) {
  std::vector<std::optional<Label>> p(predicted.begin(), predicted.end());
  return compute_metrics(std::span<const std::optional<Label>>(p), gold);
}

/// Unweighted mean of accuracy/precision/recall/F1 across folds; confusion
/// counts are summed.
inline Metrics mean_metrics(std::span<const Metrics> folds) {
  if (folds.empty()) throw Error("mean_metrics: no folds");
  Metrics m;
  for (const auto& f : folds) {
    m.tp += f.tp, m.fp += f.fp, m.tn += f.tn, m.fn += f.fn, m.n_abstain += f.n_abstain;
    m.accuracy += f.accuracy, m.precision += f.precision, m.recall += f.recall, m.f1 += f.f1;
  }
  const double n = static_cast<double>(folds.size());
  m.accuracy /= n, m.precision /= n, m.recall /= n, m.f1 /= n;
  return m;
}

inline nlohmann::json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
          {"f1", m.f1},             {"tp", m.tp},               {"fp", m.fp},
          {"tn", m.tn},             {"fn", m.fn},               {"n_abstain", m.n_abstain},
          {"positive_label", "deceptive"}};
}

inline Metrics metrics_from_json(const nlohmann::json& j) {
  Metrics m;
  m.tp = j.at("tp"), m.fp = j.at("fp"), m.tn = j.at("tn"), m.fn = j.at("fn");
  m.n_abstain = j.value("n_abstain", std::size_t{0});
  m.accuracy = j.at("accuracy"), m.precision = j.at("precision"), m.recall = j.at("recall");
  m.f1 = j.at("f1");
  return m;
}

}  // namespace lexcue
