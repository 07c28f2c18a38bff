#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexcue/conjecture.hpp"
#include "lexcue/corpus.hpp"
#include "lexcue/error.hpp"
#include "lexcue/gateway.hpp"
#include "lexcue/metrics.hpp"
#include "lexcue/parallel.hpp"

namespace lexcue {

enum class DetectCondition { zero_shot, phenomena };

inline std::string_view to_string(DetectCondition c) {
  return c == DetectCondition::zero_shot ? "zero_shot" : "phenomena";
}

inline DetectCondition parse_detect_condition(std::string_view s) {
  if (s == "zero_shot" || s == "zero-shot") return DetectCondition::zero_shot;
  if (s == "phenomena") return DetectCondition::phenomena;
  throw Error("unknown detection condition '" + std::string(s) + "'");
}

enum class ParseStatus { ok, retried, failed, error };

inline std::string_view to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::ok: return "ok";
    case ParseStatus::retried: return "retried";
    case ParseStatus::failed: return "failed";
    case ParseStatus::error: return "error";
  }
  return "?";
}

inline ParseStatus parse_parse_status(std::string_view s) {
  if (s == "ok") return ParseStatus::ok;
  if (s == "retried") return ParseStatus::retried;
  if (s == "failed") return ParseStatus::failed;
  if (s == "error") return ParseStatus::error;
  throw Error("unknown parse status '" + std::string(s) + "'");
}

namespace prompts {

inline constexpr std::string_view kDetectTask =
    "Classify the hotel review given by the user as genuine or deceptive.";
inline constexpr std::string_view kDetectAnswer =
    "Answer with exactly one word: genuine or deceptive.";
inline constexpr std::string_view kDetectStrict =
    "Respond with only the single word genuine or the single word deceptive. No other text.";

}  // namespace prompts

/// Phenomena of both polarities are always listed together; cue words never
/// appear in a detection prompt.
inline ChatRequest build_detection_prompt(const ReviewRecord& review, DetectCondition condition,
                                          const std::vector<Phenomenon>& phenomena) {
  if (condition == DetectCondition::zero_shot && !phenomena.empty())
    throw Error("zero-shot detection takes no phenomena");
  if (condition == DetectCondition::phenomena && phenomena.empty())
    throw Error("phenomena condition needs at least one phenomenon");
  ChatRequest req;
  req.system = std::string(prompts::kExpert) + " " + std::string(prompts::kDetectTask);
  if (condition == DetectCondition::phenomena) {
    req.system += "\n\nThe following language phenomena help distinguish genuine from "
                  "deceptive hotel reviews.";
    for (Label l : kLabels) {
      req.system += l == Label::genuine ? "\nPhenomena of genuine reviews:"
                                        : "\nPhenomena of deceptive reviews:";
      for (const auto& p : phenomena)
        if (p.polarity == l) req.system += "\n- " + p.statement;
    }
  }
  req.user = "Review:\n" + review.text + "\n\n" + std::string(prompts::kDetectAnswer);
  return req;
}

/// "genuine"/"deceptive" as whole words, case-insensitive, punctuation ignored.
/// Returns nullopt when both or neither appear.
inline std::optional<Label> parse_label_response(std::string_view text) {
  bool g = false, d = false;
  std::string word;
  auto flush = [&] {
    if (word == "genuine") g = true;
    if (word == "deceptive") d = true;
    word.clear();
  };
  for (unsigned char c : text) {
    if (std::isalpha(c)) word.push_back(static_cast<char>(std::tolower(c)));
    else flush();
  }
  flush();
  if (g == d) return std::nullopt;
  return g ? Label::genuine : Label::deceptive;
}

struct Prediction {
  std::optional<Label> predicted;  // nullopt = abstain
  Label gold = Label::genuine;
  std::string raw;
  ParseStatus status = ParseStatus::ok;

  bool operator==(const Prediction&) const = default;
};

struct ClassifyResult {
  std::optional<Label> label;
  std::string raw;
  ParseStatus status = ParseStatus::ok;
};

/// One request, plus one stricter retry if the answer is ambiguous.
inline ClassifyResult classify_review(Gateway& gw, const ChatRequest& req) {
  auto first = gw.complete(req);
  if (auto l = parse_label_response(first.text)) return {l, first.text, ParseStatus::ok};
  ChatRequest strict = req;
  strict.user += "\n\n" + std::string(prompts::kDetectStrict);
  auto second = gw.complete(strict);
  if (auto l = parse_label_response(second.text)) return {l, second.text, ParseStatus::retried};
  return {std::nullopt, second.text, ParseStatus::failed};
}

struct PredictionSet {
  DetectCondition condition = DetectCondition::zero_shot;
  std::vector<std::string> phenomena_ids;
  std::string provider_id;
  std::map<std::string, Prediction> entries;  // keyed by review id

  Metrics metrics() const {
    std::vector<std::optional<Label>> pred;
    std::vector<Label> gold;
    for (const auto& [id, p] : entries) {
      pred.push_back(p.predicted);
      gold.push_back(p.gold);
    }
    return compute_metrics(std::span<const std::optional<Label>>(pred), std::span<const Label>(gold));
  }

  bool operator==(const PredictionSet&) const = default;
};

/// Classifies every review; per-review failures become status=error abstentions.
inline PredictionSet run_detection(Gateway& gw, const Corpus& corpus, DetectCondition condition,
                                   const std::vector<Phenomenon>& phenomena,
                                   const DecodeParams& decode = {}) {
  PredictionSet out;
  out.condition = condition;
  for (const auto& p : phenomena) out.phenomena_ids.push_back(p.id);
  out.provider_id = gw.provider_id();
  const auto& recs = corpus.records();
  std::vector<ChatRequest> reqs;
  reqs.reserve(recs.size());
  for (const auto& r : recs) {
    reqs.push_back(build_detection_prompt(r, condition, phenomena));
    reqs.back().decode = decode;
  }

  std::vector<Prediction> preds(recs.size());
  bounded_for(recs.size(), gw.max_in_flight(), [&](std::size_t i) {
    Prediction p;
    p.gold = recs[i].label;
    try {
      auto res = classify_review(gw, reqs[i]);
      p.predicted = res.label;
      p.raw = std::move(res.raw);
      p.status = res.status;
    } catch (const std::exception& e) {
      p.status = ParseStatus::error;
      p.raw = e.what();
    }
    preds[i] = std::move(p);
  });
  for (std::size_t i = 0; i < recs.size(); ++i) out.entries.emplace(recs[i].id, std::move(preds[i]));
  return out;
}

// Persistence: a meta line followed by one prediction per line, in review id order.

inline std::string prediction_set_to_jsonl(const PredictionSet& ps) {
  std::string out = nlohmann::json{{"type", "meta"},
                                   {"condition", to_string(ps.condition)},
                                   {"phenomena_ids", ps.phenomena_ids},
                                   {"provider_id", ps.provider_id},
                                   {"n", ps.entries.size()}}
                        .dump() +
                    "\n";
  for (const auto& [id, p] : ps.entries) {
    nlohmann::json j{{"type", "prediction"},
                     {"review_id", id},
                     {"gold", to_string(p.gold)},
                     {"predicted", p.predicted ? nlohmann::json(to_string(*p.predicted))
                                               : nlohmann::json()},
                     {"raw", p.raw},
                     {"status", to_string(p.status)}};
    out += j.dump() + "\n";
  }
  return out;
}

inline PredictionSet read_prediction_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open prediction set " + path.string());
  PredictionSet ps;
  std::string line;
  std::size_t lineno = 0;
  bool have_meta = false;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.at("type") == "meta") {
        ps.condition = parse_detect_condition(j.at("condition").get<std::string>());
        ps.phenomena_ids = j.at("phenomena_ids").get<std::vector<std::string>>();
        ps.provider_id = j.value("provider_id", std::string{});
        expected = j.value("n", std::size_t{0});
        have_meta = true;
        continue;
      }
      Prediction p;
      p.gold = parse_label(j.at("gold").get<std::string>());
      if (!j.at("predicted").is_null()) p.predicted = parse_label(j["predicted"].get<std::string>());
      p.raw = j.value("raw", std::string{});
      p.status = parse_parse_status(j.at("status").get<std::string>());
      if (!ps.entries.emplace(j.at("review_id").get<std::string>(), std::move(p)).second)
        throw Error("duplicate review id");
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_meta) throw Error(path.string() + ": missing meta line");
  if (ps.entries.size() != expected)
    throw Error(path.string() + ": expected " + std::to_string(expected) + " predictions, found " +
                std::to_string(ps.entries.size()));
  return ps;
}

}  // namespace lexcue
