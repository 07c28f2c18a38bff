#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "lexcue/error.hpp"
#include "lexcue/hash.hpp"
#include "lexcue/label.hpp"
#include "lexcue/random.hpp"

namespace lexcue {

struct ReviewRecord {
  std::string id;
  std::string text;
  Label label = Label::genuine;
  std::string domain;
  std::optional<std::string> source_path;

  bool operator==(const ReviewRecord&) const = default;
};

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  });
}

/// Immutable, id-sorted collection of labeled reviews.
class Corpus {
 public:
  Corpus() = default;

  Corpus(std::string name, std::vector<ReviewRecord> records)
      : name_(std::move(name)), records_(std::move(records)) {
    std::sort(records_.begin(), records_.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (r.id.empty()) throw Error("record with empty id in corpus " + name_);
      if (is_blank(r.text)) throw Error("record '" + r.id + "' has empty text");
      if (i > 0 && records_[i - 1].id == r.id)
        throw Error("duplicate id '" + r.id + "' in corpus " + name_);
      ++counts_[r.label];
      index_.emplace(r.id, i);
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<ReviewRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t count(Label l) const {
    auto it = counts_.find(l);
    return it == counts_.end() ? 0 : it->second;
  }
  const std::map<Label, std::size_t>& counts() const { return counts_; }

  const ReviewRecord& at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("unknown review id '" + id + "'");
    return records_[it->second];
  }
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

  /// Sub-corpus of the records for which pred(record) is true.
  template <class Pred>
  Corpus filter(Pred pred, std::string name = {}) const {
    std::vector<ReviewRecord> out;
    for (const auto& r : records_)
      if (pred(r)) out.push_back(r);
    return Corpus(name.empty() ? name_ : std::move(name), std::move(out));
  }

 private:
  std::string name_;
  std::vector<ReviewRecord> records_;
  std::map<Label, std::size_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class CorpusFormat { jsonl, directory_tree };

inline CorpusFormat parse_corpus_format(std::string_view s) {
  if (s == "jsonl") return CorpusFormat::jsonl;
  if (s == "directory-tree" || s == "directory_tree")
    return CorpusFormat::directory_tree;
  throw Error("unknown corpus format '" + std::string(s) + "'");
}

inline nlohmann::json record_to_json(const ReviewRecord& r) {
  nlohmann::json j{{"id", r.id},
                   {"text", r.text},
                   {"label", to_string(r.label)},
                   {"domain", r.domain}};
  if (r.source_path) j["source_path"] = *r.source_path;
  return j;
}

namespace detail {

inline ReviewRecord record_from_json_line(const std::string& line,
                                          std::size_t lineno,
                                          const std::string& where) {
  auto fail = [&](const std::string& why) -> Error {
    return Error(where + ":" + std::to_string(lineno) + ": " + why);
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw fail(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw fail("expected a JSON object");
  for (const char* key : {"id", "text", "label", "domain"})
    if (!j.contains(key) || !j[key].is_string())
      throw fail(std::string("missing or non-string field '") + key + "'");
  ReviewRecord r;
  r.id = j["id"].get<std::string>();
  r.text = j["text"].get<std::string>();
  auto label = try_parse_label(j["label"].get<std::string>());
  if (!label)
    throw fail("unknown label '" + j["label"].get<std::string>() + "'");
  r.label = *label;
  r.domain = j["domain"].get<std::string>();
  if (j.contains("source_path") && j["source_path"].is_string())
    r.source_path = j["source_path"].get<std::string>();
  if (is_blank(r.text)) throw fail("empty text for id '" + r.id + "'");
  return r;
}

/// Maps a directory name to a label. Accepts the plain names as well as the
/// op_spam folder names ("truthful_from_TripAdvisor", "deceptive_from_MTurk").
inline std::optional<Label> label_from_dirname(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (name == "genuine" || name == "truthful" || name.starts_with("truthful_") ||
      name.starts_with("genuine_"))
    return Label::genuine;
  if (name == "deceptive" || name.starts_with("deceptive_"))
    return Label::deceptive;
  return std::nullopt;
}

}  // namespace detail

inline std::vector<ReviewRecord> read_jsonl_records(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<ReviewRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    out.push_back(detail::record_from_json_line(line, lineno, path.string()));
  }
  return out;
}

struct DirectoryLoadInfo {
  std::size_t skipped_unlabeled = 0;
};

/// <root>/.../<label dir>/.../<file>.txt; id is the path relative to root.
/// Files with no label-named ancestor directory (e.g. a README) are skipped.
inline std::vector<ReviewRecord> read_directory_records(
    const std::filesystem::path& root, const std::string& domain,
    DirectoryLoadInfo* info = nullptr) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root))
    throw Error("corpus root is not a directory: " + root.string());
  std::vector<ReviewRecord> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    const fs::path rel = fs::relative(entry.path(), root);
    std::optional<Label> label;
    for (auto it = rel.begin(); it != rel.end() && std::next(it) != rel.end();
         ++it)
      if (auto l = detail::label_from_dirname(it->string())) label = l;
    if (!label) {
      if (info) ++info->skipped_unlabeled;
      continue;
    }
    ReviewRecord r;
    r.id = rel.generic_string();
    r.text = read_file(entry.path());
    while (!r.text.empty() &&
           (r.text.back() == '\n' || r.text.back() == '\r' || r.text.back() == ' '))
      r.text.pop_back();
    r.label = *label;
    r.domain = domain;
    r.source_path = rel.generic_string();
    out.push_back(std::move(r));
  }
  return out;
}

inline Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                          const std::string& name) {
  if (!std::filesystem::exists(path))
    throw Error("corpus path does not exist: " + path.string());
  if (format == CorpusFormat::jsonl)
    return Corpus(name, read_jsonl_records(path));
  return Corpus(name, read_directory_records(path, name));
}

/// Loads a corpus from either a .jsonl file or a directory tree.
inline Corpus load_corpus_auto(const std::filesystem::path& path,
                               const std::string& name) {
  return load_corpus(path,
                     std::filesystem::is_directory(path)
                         ? CorpusFormat::directory_tree
                         : CorpusFormat::jsonl,
                     name);
}

inline std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus.records()) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Folds and sampling

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> assignments;

  std::size_t fold_of(const std::string& id) const {
    auto it = assignments.find(id);
    if (it == assignments.end()) throw Error("id not in fold plan: " + id);
    return it->second;
  }

  /// (train, test) split for fold f.
  std::pair<Corpus, Corpus> split(const Corpus& corpus, std::size_t f) const {
    auto name = corpus.name() + "/fold" + std::to_string(f);
    return {corpus.filter([&](const ReviewRecord& r) { return fold_of(r.id) != f; },
                          name + "/train"),
            corpus.filter([&](const ReviewRecord& r) { return fold_of(r.id) == f; },
                          name + "/test")};
  }
};

namespace detail {
inline std::vector<std::string> ids_with_label(const Corpus& c, Label l) {
  std::vector<std::string> ids;
  for (const auto& r : c.records())
    if (r.label == l) ids.push_back(r.id);
  return ids;  // already sorted: corpus is id-ordered
}
inline std::uint64_t label_seed(std::uint64_t seed, Label l) {
  return mix64(seed ^ (0x5bd1e995ULL * (static_cast<std::uint64_t>(l) + 1)));
}
}  // namespace detail

/// Seeded stratified k-fold assignment. Ids are taken in sorted order, so the
/// result depends only on (corpus contents, k, seed).
inline FoldPlan make_stratified_folds(const Corpus& corpus, std::size_t k,
                                      std::uint64_t seed) {
  if (k < 2) throw Error("k must be >= 2");
  FoldPlan plan{k, seed, {}};
  std::size_t offset = 0;
  for (Label l : kLabels) {
    auto ids = detail::ids_with_label(corpus, l);
    if (ids.size() < k)
      throw Error("label '" + std::string(to_string(l)) + "' has " +
                  std::to_string(ids.size()) + " records, fewer than k=" +
                  std::to_string(k));
    Rng rng(detail::label_seed(seed, l));
    rng.shuffle(std::span(ids));
    // Continue the round robin across labels so total fold sizes stay within 1.
    for (std::size_t i = 0; i < ids.size(); ++i)
      plan.assignments[ids[i]] = (offset + i) % k;
    offset = (offset + ids.size()) % k;
  }
  return plan;
}

/// n_per_label records of each label, drawn without replacement.
inline std::vector<ReviewRecord> sample_balanced(const Corpus& corpus,
                                                 std::size_t n_per_label,
                                                 std::uint64_t seed) {
  if (n_per_label == 0) throw Error("n_per_label must be positive");
  std::vector<ReviewRecord> out;
  for (Label l : kLabels) {
    auto ids = detail::ids_with_label(corpus, l);
    if (ids.size() < n_per_label)
      throw Error("cannot sample " + std::to_string(n_per_label) + " '" +
                  std::string(to_string(l)) + "' records; corpus has " +
                  std::to_string(ids.size()));
    Rng rng(detail::label_seed(seed, l) ^ 0xa5a5a5a5ULL);
    rng.shuffle(std::span(ids));
    for (std::size_t i = 0; i < n_per_label; ++i) out.push_back(corpus.at(ids[i]));
  }
  Rng rng(mix64(seed));
  rng.shuffle(std::span(out));
  return out;
}

}  // namespace lexcue
