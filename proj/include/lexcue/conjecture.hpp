#pragma once

#include <algorithm>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lexcue/corpus.hpp"
#include "lexcue/cues.hpp"
#include "lexcue/error.hpp"
#include "lexcue/gateway.hpp"
#include "lexcue/hash.hpp"
#include "lexcue/label.hpp"

namespace lexcue {

enum class PhenomenonSource { predictive_words, sampled_reviews, prior_knowledge };

inline std::string_view to_string(PhenomenonSource s) {
  switch (s) {
    case PhenomenonSource::predictive_words: return "predictive_words";
    case PhenomenonSource::sampled_reviews: return "sampled_reviews";
    case PhenomenonSource::prior_knowledge: return "prior_knowledge";
  }
  return "?";
}

inline PhenomenonSource parse_phenomenon_source(std::string_view s) {
  if (s == "predictive_words" || s == "predictive-words") return PhenomenonSource::predictive_words;
  if (s == "sampled_reviews" || s == "sampled-reviews") return PhenomenonSource::sampled_reviews;
  if (s == "prior_knowledge" || s == "prior-knowledge") return PhenomenonSource::prior_knowledge;
  throw Error("unknown phenomenon source '" + std::string(s) + "'");
}

struct Phenomenon {
  std::string id;
  Label polarity = Label::genuine;
  std::string statement;
  PhenomenonSource source = PhenomenonSource::predictive_words;
  std::string provider_id;
  std::string timestamp;

  bool operator==(const Phenomenon&) const = default;
};

/// Lowercase, whitespace collapsed, trimmed.
inline std::string normalize_statement(std::string_view s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

inline std::string phenomenon_id(Label polarity, std::string_view statement) {
  return sha256_hex(std::string(to_string(polarity)) + "\n" + normalize_statement(statement))
      .substr(0, 16);
}

inline Phenomenon make_phenomenon(Label polarity, std::string statement,
                                  PhenomenonSource source = PhenomenonSource::predictive_words) {
  Phenomenon p;
  p.polarity = polarity;
  p.statement = std::move(statement);
  p.id = phenomenon_id(polarity, p.statement);
  p.source = source;
  return p;
}

// ---------------------------------------------------------------------------
// Prompts

namespace prompts {

inline constexpr std::string_view kExpert = "You are an expert in deception detection.";

inline constexpr std::string_view kWordsInput =
    "You will be provided a list of words that are most predictive of genuine or "
    "deceptive Chicago hotel reviews.";
inline constexpr std::string_view kWordsTask =
    "Your task is to identify language phenomena or psycholinguistic patterns that "
    "appear in genuine and deceptive hotel reviews and are related to these words.";

inline constexpr std::string_view kReviewsInput =
    "You will be provided a sample of genuine and deceptive Chicago hotel reviews.";
inline constexpr std::string_view kReviewsTask =
    "Your task is to identify language phenomena or psycholinguistic patterns that "
    "appear in genuine and deceptive hotel reviews and are reflected in these reviews.";

inline constexpr std::string_view kPriorTask =
    "Your task is to identify language phenomena or psycholinguistic patterns that "
    "appear in genuine and deceptive hotel reviews.";

inline constexpr std::string_view kOutputFormat =
    "Write one phenomenon per line, each line starting with its polarity tag:\n"
    "GENUINE: <one-sentence phenomenon>\n"
    "DECEPTIVE: <one-sentence phenomenon>\n"
    "Do not write anything else.";

inline constexpr std::string_view kFormatReminder =
    "Reminder: every line must start with GENUINE: or DECEPTIVE: followed by one sentence.";

}  // namespace prompts

using ConjecturePayload = std::variant<std::monostate, CueSet, std::vector<ReviewRecord>>;

inline std::string join_terms(const std::set<std::string>& terms) {
  std::string out;
  for (const auto& t : terms) {
    if (!out.empty()) out += ", ";
    out += t;
  }
  return out;
}

inline ChatRequest build_conjecture_prompt(PhenomenonSource source,
                                           const ConjecturePayload& payload) {
  ChatRequest req;
  std::string sys(prompts::kExpert);
  switch (source) {
    case PhenomenonSource::predictive_words: {
      const auto* cues = std::get_if<CueSet>(&payload);
      if (!cues) throw Error("predictive_words conjecture needs a cue set");
      if (cues->size() == 0) throw Error("predictive_words conjecture needs at least one cue");
      sys += ' ';
      sys += prompts::kWordsInput;
      sys += ' ';
      sys += prompts::kWordsTask;
      req.user = "Words predictive of genuine reviews: " + join_terms(cues->genuine) +
                 "\nWords predictive of deceptive reviews: " + join_terms(cues->deceptive) +
                 "\n\n" + std::string(prompts::kOutputFormat);
      break;
    }
    case PhenomenonSource::sampled_reviews: {
      const auto* recs = std::get_if<std::vector<ReviewRecord>>(&payload);
      if (!recs) throw Error("sampled_reviews conjecture needs a list of reviews");
      if (recs->empty()) throw Error("sampled_reviews conjecture needs at least one review");
      sys += ' ';
      sys += prompts::kReviewsInput;
      sys += ' ';
      sys += prompts::kReviewsTask;
      std::string body;
      for (std::size_t i = 0; i < recs->size(); ++i) {
        const auto& r = (*recs)[i];
        body += "Review " + std::to_string(i + 1) + " (" + std::string(to_string(r.label)) +
                "):\n" + r.text + "\n\n";
      }
      req.user = body + std::string(prompts::kOutputFormat);
      break;
    }
    case PhenomenonSource::prior_knowledge: {
      if (!std::holds_alternative<std::monostate>(payload))
        throw Error("prior_knowledge conjecture takes no input");
      sys += ' ';
      sys += prompts::kPriorTask;
      req.user = std::string(prompts::kOutputFormat);
      break;
    }
  }
  req.system = std::move(sys);
  return req;
}

// ---------------------------------------------------------------------------
// Parsing

struct PhenomenaParse {
  std::vector<Phenomenon> phenomena;
  std::vector<std::string> skipped;  // non-empty lines without a polarity tag
};

/// Lenient line parser: optional list markers, case-insensitive tag, then
/// ':' or '|' or '-' before the statement. Duplicate ids keep the first line.
inline PhenomenaParse parse_phenomena_detailed(std::string_view text,
                                               PhenomenonSource source = PhenomenonSource::predictive_words) {
  PhenomenaParse out;
  std::set<std::string> seen;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;

    std::size_t i = 0;
    while (i < line.size() && (std::isspace(static_cast<unsigned char>(line[i])) ||
                               (line[i] != '\0' && std::strchr("-*#>0123456789.)", line[i]) != nullptr)))
      ++i;
    // Markdown bold around the tag.
    while (i < line.size() && line[i] == '*') ++i;
    std::string rest(line.substr(i));
    if (rest.find_first_not_of(" \t\r") == std::string::npos) continue;

    std::string upper = rest.substr(0, std::min<std::size_t>(rest.size(), 9));
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    std::optional<Label> pol;
    std::size_t tag_len = 0;
    if (upper.starts_with("GENUINE")) pol = Label::genuine, tag_len = 7;
    else if (upper.starts_with("DECEPTIVE")) pol = Label::deceptive, tag_len = 9;

    std::size_t j = tag_len;
    while (j < rest.size() && rest[j] == '*') ++j;
    while (j < rest.size() && rest[j] == ' ') ++j;
    if (!pol || j >= rest.size() || rest[j] == '\0' || std::strchr(":|-", rest[j]) == nullptr) {
      out.skipped.emplace_back(line);
      continue;
    }
    std::string statement = rest.substr(j + 1);
    while (!statement.empty() && (std::isspace(static_cast<unsigned char>(statement.front())) ||
                                  statement.front() == '*'))
      statement.erase(statement.begin());
    while (!statement.empty() && std::isspace(static_cast<unsigned char>(statement.back())))
      statement.pop_back();
    if (statement.empty()) {
      out.skipped.emplace_back(line);
      continue;
    }
    auto ph = make_phenomenon(*pol, std::move(statement), source);
    if (seen.insert(ph.id).second) out.phenomena.push_back(std::move(ph));
  }
  return out;
}

inline std::vector<Phenomenon> parse_phenomena(std::string_view text) {
  return parse_phenomena_detailed(text).phenomena;
}

/// Canonical line format, the inverse of parse_phenomena.
inline std::string format_phenomena(const std::vector<Phenomenon>& ps) {
  std::string out;
  for (const auto& p : ps) {
    out += p.polarity == Label::deceptive ? "DECEPTIVE: " : "GENUINE: ";
    out += p.statement;
    out += '\n';
  }
  return out;
}

struct ConjectureResult {
  std::vector<Phenomenon> phenomena;
  std::vector<std::string> warnings;
};

/// Sends the conjecture prompt; up to two retries append a format reminder
/// when nothing parseable comes back.
inline ConjectureResult conjecture_phenomena(Gateway& gw, const ChatRequest& req,
                                             PhenomenonSource source) {
  ConjectureResult out;
  for (int attempt = 0; attempt <= 2; ++attempt) {
    ChatRequest r = req;
    if (attempt > 0) r.user += "\n\n" + std::string(prompts::kFormatReminder);
    auto resp = gw.complete(r);
    auto parsed = parse_phenomena_detailed(resp.text, source);
    for (const auto& s : parsed.skipped) out.warnings.push_back("skipped unlabeled line: " + s);
    if (!parsed.phenomena.empty()) {
      for (auto& p : parsed.phenomena) {
        p.provider_id = resp.provider_id;
        p.timestamp = resp.timestamp;
      }
      out.phenomena = std::move(parsed.phenomena);
      return out;
    }
  }
  throw Error("no parseable phenomena after 2 retries");
}

// ---------------------------------------------------------------------------
// Persistence: JSONL, one Phenomenon per line.

inline nlohmann::json to_json(const Phenomenon& p) {
  return {{"id", p.id},
          {"polarity", to_string(p.polarity)},
          {"statement", p.statement},
          {"source", to_string(p.source)},
          {"provider_id", p.provider_id},
          {"timestamp", p.timestamp}};
}

inline Phenomenon phenomenon_from_json(const nlohmann::json& j) {
  Phenomenon p;
  p.polarity = parse_label(j.at("polarity").get<std::string>());
  p.statement = j.at("statement").get<std::string>();
  p.source = parse_phenomenon_source(j.value("source", std::string("predictive_words")));
  p.provider_id = j.value("provider_id", std::string{});
  p.timestamp = j.value("timestamp", std::string{});
  p.id = phenomenon_id(p.polarity, p.statement);
  if (j.contains("id") && j["id"].get<std::string>() != p.id)
    throw Error("phenomenon id mismatch for statement: " + p.statement);
  return p;
}

inline std::string phenomena_to_jsonl(const std::vector<Phenomenon>& ps) {
  std::string out;
  for (const auto& p : ps) out += to_json(p).dump() + "\n";
  return out;
}

inline std::vector<Phenomenon> read_phenomena_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open phenomena file " + path.string());
  std::vector<Phenomenon> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(phenomenon_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace lexcue
