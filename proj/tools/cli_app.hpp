#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lexcue/lexcue.hpp"
#include "lexcue/mock_responder.hpp"

namespace lexcue::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config files: "key = value" per line, '#' starts a comment. Keys are the
// long option names of the subcommand ("api_key_env" and "api-key-env" both
// work). Command-line flags override the file.

struct ConfigEntry {
  std::string key, value;
  std::size_t line = 0;
};

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<ConfigEntry> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::vector<ConfigEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    ConfigEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno};
    for (char& c : e.key)
      if (c == '_') c = '-';
    if (e.value.size() >= 2 && e.value.front() == '"' && e.value.back() == '"')
      e.value = e.value.substr(1, e.value.size() - 2);
    if (e.key.empty())
      throw Error(path.string() + ":" + std::to_string(lineno) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

/// Snapshot of every option of `sub` after parsing, defaults included.
/// Snapshot value typed after the option's declared type, so numbers stay numbers.
inline json typed_value(const CLI::Option& o, const std::string& v) {
  const std::string t = o.get_type_name();
  try {
    std::size_t used = 0;
    if (t.starts_with("INT")) {
      const long long x = std::stoll(v, &used);
      if (used == v.size()) return x;
    } else if (t.starts_with("UINT")) {
      const unsigned long long x = std::stoull(v, &used);
      if (used == v.size()) return x;
    } else if (t.starts_with("FLOAT")) {
      const double x = std::stod(v, &used);
      if (used == v.size()) return x;
    }
  } catch (const std::exception&) {
  }
  return v;
}

inline json resolved_config(const CLI::App& sub) {
  json j = json::object();
  j["command"] = sub.get_name();
  for (const CLI::Option* o : sub.get_options()) {
    const std::string& name = o->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    const bool multi = o->get_items_expected_max() > 1;
    if (o->count() > 0) {
      const auto& r = o->results();
      if (multi) {
        json arr = json::array();
        for (const auto& v : r) arr.push_back(typed_value(*o, v));
        j[name] = arr;
      } else {
        j[name] = typed_value(*o, r.back());
      }
    } else {
      j[name] = multi ? json::array() : typed_value(*o, o->get_default_str());
    }
  }
  return j;
}

// ---------------------------------------------------------------------------
// Shared option groups

struct ProviderArgs {
  std::string provider = "mock";
  std::string endpoint = "https://api.openai.com/v1";
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t concurrency = 4;
  std::string cache_dir;
  int max_retries = 5;
  double retry_base_delay = 1.0;
  double temperature = -1.0;  // negative: provider default
  int max_tokens = 0;         // zero: provider default
  std::uint64_t mock_seed = 0;
  std::string mock_fixtures;

  void add_to(CLI::App* sub) {
    sub->add_option("--provider", provider, "mock or openai (OpenAI-compatible chat API)")
        ->check(CLI::IsMember({"mock", "openai"}));
    sub->add_option("--endpoint", endpoint, "Base URL of the chat API");
    sub->add_option("--model", model, "Model name sent to the chat API");
    sub->add_option("--api-key-env", api_key_env, "Environment variable holding the API key");
    sub->add_option("--concurrency", concurrency, "Maximum in-flight requests")
        ->check(CLI::Range(1, 256));
    sub->add_option("--cache-dir", cache_dir, "Response cache directory (empty: no cache)");
    sub->add_option("--max-retries", max_retries, "Retries on rate limits and server errors")
        ->check(CLI::Range(0, 20));
    sub->add_option("--retry-base-delay", retry_base_delay, "First backoff delay in seconds")
        ->check(CLI::Range(0.0, 600.0));
    sub->add_option("--temperature", temperature, "Sampling temperature (negative: unset)");
    sub->add_option("--max-tokens", max_tokens, "Completion token limit (0: unset)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--mock-seed", mock_seed, "Seed of the offline mock provider");
    sub->add_option("--mock-fixtures", mock_fixtures, "JSONL fixtures for the mock provider");
  }

  DecodeParams decode() const {
    DecodeParams d;
    if (temperature >= 0) d.temperature = temperature;
    if (max_tokens > 0) d.max_tokens = max_tokens;
    return d;
  }

  /// Everything that could fail before the first request is checked here.
  std::unique_ptr<Gateway> make_gateway() const {
    std::shared_ptr<ChatProvider> p;
    if (provider == "mock") {
      auto mock = std::make_shared<MockProvider>("mock-" + std::to_string(mock_seed),
                                                 seeded_mock_responder(mock_seed));
      if (!mock_fixtures.empty()) mock->load_fixtures(mock_fixtures);
      p = mock;
    } else {
      if (model.empty()) throw Error("--model is required with --provider openai");
      const char* key = std::getenv(api_key_env.c_str());
      if (!key || !*key) throw Error("environment variable " + api_key_env + " is not set");
      split_endpoint(endpoint);
      p = std::make_shared<OpenAICompatProvider>(RemoteConfig{endpoint, model, key, 120.0});
    }
    std::optional<fs::path> cache;
    if (!cache_dir.empty()) cache = fs::path(cache_dir);
    RetryPolicy rp;
    rp.max_retries = max_retries;
    rp.base_delay_s = retry_base_delay;
    return std::make_unique<Gateway>(p, cache, concurrency, rp);
  }
};

struct TrainArgs {
  double lambda = 1.0;
  double tol = 1e-8;
  int max_iter = 100;
  std::string stoplist;

  void add_to(CLI::App* sub) {
    sub->add_option("--lambda", lambda, "L2 penalty strength")->check(CLI::NonNegativeNumber);
    sub->add_option("--tol", tol, "Gradient tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", max_iter, "Newton iteration cap")->check(CLI::Range(1, 10000));
    sub->add_option("--stoplist", stoplist, "Stop list file (default: built-in list)")
        ->check(CLI::ExistingFile);
  }

  TrainOptions options() const {
    TrainOptions o;
    o.lambda = lambda;
    o.tol = tol;
    o.max_iter = max_iter;
    return o;
  }
  Stoplist words() const { return stoplist.empty() ? default_stoplist() : load_stoplist(stoplist); }
  std::string words_hash() const {
    return stoplist.empty() ? default_stoplist_hash() : sha256_file(stoplist);
  }
};

struct BackendArgs {
  std::string backend = "ngram";
  std::string lm_corpus;
  std::size_t lm_order = 2;
  double lm_add_k = 1.0;
  double lm_prefix_weight = 0.1;
  std::string lm_endpoint;
  std::string lm_model;
  std::string score_cache;
  std::size_t parallelism = 1;

  void add_to(CLI::App* sub) {
    sub->add_option("--backend", backend, "Scoring backend: ngram or remote")
        ->check(CLI::IsMember({"ngram", "remote"}));
    sub->add_option("--lm-corpus", lm_corpus, "Corpus the n-gram model is fitted on");
    sub->add_option("--lm-order", lm_order, "n-gram order")->check(CLI::Range(1, 8));
    sub->add_option("--lm-add-k", lm_add_k, "Add-k smoothing constant")
        ->check(CLI::PositiveNumber);
    sub->add_option("--lm-prefix-weight", lm_prefix_weight,
                    "Weight of the prefix-copy component (0 disables it)")
        ->check(CLI::Range(0.0, 0.999));
    sub->add_option("--lm-endpoint", lm_endpoint, "Remote log-probability service URL");
    sub->add_option("--lm-model", lm_model, "Remote scoring model id");
    sub->add_option("--score-cache", score_cache, "Directory for cached phenomenon scores");
    sub->add_option("--parallelism", parallelism, "Concurrent scoring workers")
        ->check(CLI::Range(1, 256));
  }

  std::shared_ptr<const ScoringBackend> make(const fs::path& default_corpus) const {
    if (backend == "remote") {
      if (lm_endpoint.empty() || lm_model.empty())
        throw Error("--backend remote needs --lm-endpoint and --lm-model");
      return std::make_shared<RemoteLogprobBackend>(lm_endpoint, lm_model);
    }
    const fs::path src = lm_corpus.empty() ? default_corpus : fs::path(lm_corpus);
    const Corpus c = load_corpus_auto(src, src.stem().string());
    std::vector<std::string> texts;
    for (const auto& r : c.records()) texts.push_back(r.text);
    std::shared_ptr<const ScoringBackend> b =
        std::make_shared<NgramBackend>(std::make_shared<const NgramLM>(fit_ngram_lm(texts, lm_order, lm_add_k)));
    if (lm_prefix_weight > 0) b = std::make_shared<PrefixCacheBackend>(b, lm_prefix_weight);
    return b;
  }

  std::unique_ptr<ScoreCache> make_cache(const ScoringBackend& b) const {
    if (score_cache.empty()) return nullptr;
    return std::make_unique<ScoreCache>(score_cache, b.fingerprint());
  }
};

inline Corpus load_named(const std::string& path) {
  return load_corpus_auto(path, fs::path(path).stem().string());
}

inline std::string fmt_metrics(const Metrics& m) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "acc %.4f  prec %.4f  recall %.4f  f1 %.4f", m.accuracy,
                m.precision, m.recall, m.f1);
  std::string s = buf;
  if (m.n_abstain) s += "  abstain " + std::to_string(m.n_abstain);
  return s;
}

inline void write_json(const fs::path& p, const json& j) { write_text_file(p, j.dump(2) + "\n"); }

inline void write_snapshot(const fs::path& out_dir, const std::string& stem, const json& cfg) {
  write_json(out_dir / (stem + ".config.json"), cfg);
}

// ---------------------------------------------------------------------------

struct Context {
  std::ostream& out;
  std::ostream& err;
};

class App {
 public:
  App() : app_("Lexical cue mining and phenomenon checks for deceptive review detection", "lexcue") {
    app_.require_subcommand(1);
    app_.option_defaults()->always_capture_default()->multi_option_policy(
        CLI::MultiOptionPolicy::TakeLast);
    add_ingest();
    add_cues();
    add_conjecture();
    add_detect();
    add_score();
    add_crossdomain();
    add_report();
  }

  int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    Context ctx{out, err};
    try {
      args = apply_config(std::move(args));
      std::reverse(args.begin(), args.end());
      app_.parse(args);
    } catch (const CLI::ParseError& e) {
      return app_.exit(e, out, err);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
    for (auto& [sub, fn] : handlers_) {
      if (!sub->parsed()) continue;
      try {
        fn(ctx, *sub);
        return 0;
      } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
      }
    }
    return 1;
  }

 private:
  using Handler = std::function<void(Context&, const CLI::App&)>;

  CLI::App* add_sub(const std::string& name, const std::string& desc, std::string& out_dir,
                    Handler fn) {
    auto* sub = app_.add_subcommand(name, desc);
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--config", config_path_, "key = value config file; flags override it");
    handlers_.emplace_back(sub, std::move(fn));
    return sub;
  }

  /// Inserts config-file entries as --key=value right after the subcommand so
  /// that explicit flags, which come later, win.
  std::vector<std::string> apply_config(std::vector<std::string> args) {
    std::string cfg;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) cfg = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) cfg = args[i].substr(9);
    }
    if (cfg.empty() || args.empty()) return args;
    CLI::App* sub = nullptr;
    for (auto& [s, _] : handlers_)
      if (s->get_name() == args[0]) sub = s;
    if (!sub) return args;
    std::vector<std::string> expanded{args[0]};
    for (const auto& e : read_config_file(cfg)) {
      if (e.key == "config" || !sub->get_option_no_throw("--" + e.key))
        throw Error(cfg + ":" + std::to_string(e.line) + ": unknown key '" + e.key +
                    "' for command " + args[0]);
      expanded.push_back("--" + e.key + "=" + e.value);
    }
    expanded.insert(expanded.end(), args.begin() + 1, args.end());
    return expanded;
  }

  // -- ingest ---------------------------------------------------------------

  struct {
    std::string format = "directory-tree", root, name, out = ".";
  } ingest_;

  void add_ingest() {
    auto* sub = add_sub("ingest", "Load a corpus and write normalized JSONL", ingest_.out,
                        [this](Context& c, const CLI::App& s) { do_ingest(c, s); });
    sub->add_option("--format", ingest_.format, "directory-tree or jsonl")
        ->check(CLI::IsMember({"directory-tree", "directory_tree", "jsonl"}));
    sub->add_option("--root", ingest_.root, "Corpus directory or JSONL file")->required();
    sub->add_option("--name", ingest_.name, "Corpus name; also the output file stem")->required();
  }

  void do_ingest(Context& c, const CLI::App& s) {
    const auto& a = ingest_;
    Corpus corpus = load_corpus(a.root, parse_corpus_format(a.format), a.name);
    const fs::path out = fs::path(a.out) / (a.name + ".jsonl");
    write_text_file(out, corpus_to_jsonl(corpus));
    write_snapshot(a.out, a.name, resolved_config(s));
    c.out << "wrote " << corpus.size() << " records (" << corpus.count(Label::genuine)
          << " genuine, " << corpus.count(Label::deceptive) << " deceptive) to " << out.string()
          << "\n";
  }

  // -- cues -----------------------------------------------------------------

  struct {
    std::string corpus, out = ".";
    std::size_t k = 10, topk = 25, parallelism = 1;
    double alpha = 0.05;
    std::uint64_t seed = 7;
    TrainArgs train;
  } cues_;

  void add_cues() {
    auto* sub = add_sub("cues", "Cross-validated classifier and stable cue extraction", cues_.out,
                        [this](Context& c, const CLI::App& s) { do_cues(c, s); });
    sub->add_option("--corpus", cues_.corpus, "Corpus JSONL file or directory")->required();
    sub->add_option("--k", cues_.k, "Number of folds")->check(CLI::Range(2, 1000));
    sub->add_option("--topk", cues_.topk, "Cues kept per label and fold")->check(CLI::Range(1, 100000));
    sub->add_option("--alpha", cues_.alpha, "Wald significance level")
        ->check(CLI::Range(1e-12, 0.999999));
    sub->add_option("--seed", cues_.seed, "Fold assignment seed");
    sub->add_option("--parallelism", cues_.parallelism, "Folds trained concurrently")
        ->check(CLI::Range(1, 256));
    cues_.train.add_to(sub);
  }

  void do_cues(Context& c, const CLI::App& s) {
    const auto& a = cues_;
    const Corpus corpus = load_named(a.corpus);
    const FoldPlan plan = make_stratified_folds(corpus, a.k, a.seed);
    CvOptions opt;
    opt.train = a.train.options();
    opt.topk = a.topk;
    opt.alpha = a.alpha;
    opt.stoplist = a.train.words();
    opt.stoplist_hash = a.train.words_hash();
    opt.parallelism = a.parallelism;
    const json cfg = resolved_config(s);
    write_snapshot(a.out, "cues", cfg);
    const CvResult cv = run_cv(corpus, plan, opt);

    json folds = json::array();
    for (const auto& f : cv.folds)
      folds.push_back({{"fold", f.fold},
                       {"metrics", to_json(f.metrics)},
                       {"cues", to_json(f.cues)},
                       {"converged", f.model.model.converged},
                       {"n_iter", f.model.model.n_iter},
                       {"vocabulary_size", f.model.tfidf.size()}});
    write_json(fs::path(a.out) / "cues.json", to_json(cv.cues));
    write_json(fs::path(a.out) / "cues.folds.json",
               {{"config", cfg}, {"n_records", corpus.size()}, {"mean", to_json(cv.mean)}, {"folds", folds}});
    c.out << "fold-mean " << fmt_metrics(cv.mean) << "\n";
    c.out << "stable cues: " << cv.cues.of(Label::genuine).size() << " genuine, "
          << cv.cues.of(Label::deceptive).size() << " deceptive\n";
    if (cv.cues.size() == 0)
      c.err << "warning: no cue is stable across all folds; try a larger --topk\n";
  }

  // -- conjecture -----------------------------------------------------------

  struct {
    std::string source, cues, corpus, out = ".";
    std::size_t n_samples = 20;
    std::uint64_t seed = 7;
    ProviderArgs provider;
  } conj_;

  void add_conjecture() {
    auto* sub = add_sub("conjecture", "Ask a chat model for language phenomena", conj_.out,
                        [this](Context& c, const CLI::App& s) { do_conjecture(c, s); });
    sub->add_option("--source", conj_.source,
                    "predictive_words, sampled_reviews or prior_knowledge")
        ->required();
    sub->add_option("--cues", conj_.cues, "Cue set file (predictive_words)");
    sub->add_option("--corpus", conj_.corpus, "Corpus to sample from (sampled_reviews)");
    sub->add_option("--n-samples", conj_.n_samples, "Balanced sample size (sampled_reviews)")
        ->check(CLI::Range(2, 100000));
    sub->add_option("--seed", conj_.seed, "Sampling seed");
    conj_.provider.add_to(sub);
  }

  void do_conjecture(Context& c, const CLI::App& s) {
    const auto& a = conj_;
    const PhenomenonSource src = parse_phenomenon_source(a.source);
    ConjecturePayload payload;
    switch (src) {
      case PhenomenonSource::predictive_words:
        if (a.cues.empty()) throw Error("--source predictive_words needs --cues");
        payload = cueset_from_json(json::parse(read_file(a.cues)));
        break;
      case PhenomenonSource::sampled_reviews:
        if (a.corpus.empty()) throw Error("--source sampled_reviews needs --corpus");
        payload = sample_balanced(load_named(a.corpus), a.n_samples, a.seed);
        break;
      case PhenomenonSource::prior_knowledge:
        if (!a.cues.empty() || !a.corpus.empty())
          throw Error("--source prior_knowledge takes neither --cues nor --corpus");
        break;
    }
    ChatRequest req = build_conjecture_prompt(src, payload);
    req.decode = a.provider.decode();
    auto gw = a.provider.make_gateway();
    const std::string stem = "phenomena-" + std::string(to_string(src));
    write_snapshot(a.out, stem, resolved_config(s));
    const auto res = conjecture_phenomena(*gw, req, src);
    for (const auto& w : res.warnings) c.err << "warning: " << w << "\n";
    const fs::path out = fs::path(a.out) / (stem + ".jsonl");
    write_text_file(out, phenomena_to_jsonl(res.phenomena));
    c.out << "wrote " << res.phenomena.size() << " phenomena to " << out.string() << "\n";
  }

  // -- detect ---------------------------------------------------------------

  struct {
    std::string corpus, condition = "zero_shot", phenomena, tag, out = ".";
    std::size_t sample = 0;
    std::uint64_t seed = 7;
    ProviderArgs provider;
  } det_;

  void add_detect() {
    auto* sub = add_sub("detect", "Classify reviews with a chat model", det_.out,
                        [this](Context& c, const CLI::App& s) { do_detect(c, s); });
    sub->add_option("--corpus", det_.corpus, "Corpus JSONL file or directory")->required();
    sub->add_option("--condition", det_.condition, "zero_shot or phenomena")
        ->check(CLI::IsMember({"zero_shot", "zero-shot", "phenomena"}));
    sub->add_option("--phenomena", det_.phenomena, "Phenomena JSONL (phenomena condition)");
    sub->add_option("--sample", det_.sample, "Balanced subsample size (0: whole corpus)");
    sub->add_option("--seed", det_.seed, "Subsample seed");
    sub->add_option("--tag", det_.tag, "Output file stem (default predictions-<condition>)");
    det_.provider.add_to(sub);
  }

  void do_detect(Context& c, const CLI::App& s) {
    const auto& a = det_;
    const DetectCondition cond = parse_detect_condition(a.condition);
    std::vector<Phenomenon> ph;
    if (cond == DetectCondition::phenomena) {
      if (a.phenomena.empty()) throw Error("--condition phenomena needs --phenomena");
      ph = read_phenomena_jsonl(a.phenomena);
    } else if (!a.phenomena.empty()) {
      throw Error("--condition zero_shot takes no --phenomena");
    }
    Corpus corpus = load_named(a.corpus);
    if (a.sample > 0) corpus = Corpus(corpus.name(), sample_balanced(corpus, a.sample, a.seed));
    auto gw = a.provider.make_gateway();
    const std::string stem =
        a.tag.empty() ? "predictions-" + std::string(to_string(cond)) : a.tag;
    write_snapshot(a.out, stem, resolved_config(s));
    const PredictionSet ps = run_detection(*gw, corpus, cond, ph, a.provider.decode());
    std::size_t errors = 0;
    for (const auto& [id, p] : ps.entries) errors += p.status == ParseStatus::error;
    const fs::path out = fs::path(a.out) / (stem + ".jsonl");
    write_text_file(out, prediction_set_to_jsonl(ps));
    c.out << stem << ": " << fmt_metrics(ps.metrics()) << "\n";
    if (errors) c.err << "warning: " << errors << " reviews failed and count as abstentions\n";
  }

  // -- score ----------------------------------------------------------------

  struct {
    std::string corpus, phenomena, tag = "scores", out = ".";
    BackendArgs backend;
  } score_;

  void add_score() {
    auto* sub = add_sub("score", "Generative phenomenon scores for every review", score_.out,
                        [this](Context& c, const CLI::App& s) { do_score(c, s); });
    sub->add_option("--corpus", score_.corpus, "Corpus JSONL file or directory")->required();
    sub->add_option("--phenomena", score_.phenomena, "Phenomena JSONL")->required();
    sub->add_option("--tag", score_.tag, "Output file stem");
    score_.backend.add_to(sub);
  }

  void do_score(Context& c, const CLI::App& s) {
    const auto& a = score_;
    const auto ph = read_phenomena_jsonl(a.phenomena);
    if (ph.empty()) throw Error(a.phenomena + " holds no phenomena");
    const Corpus corpus = load_named(a.corpus);
    const auto backend = a.backend.make(a.corpus);
    auto cache = a.backend.make_cache(*backend);
    write_snapshot(a.out, a.tag, resolved_config(s));
    ScoringOptions so{a.backend.parallelism, cache.get()};
    const auto fm = build_feature_matrix(corpus, ph, backend.get(), false, nullptr, nullptr, so);
    const fs::path out = fs::path(a.out) / (a.tag + ".csv");
    write_text_file(out, feature_matrix_to_csv(fm));
    c.out << "scored " << corpus.size() << " reviews under " << ph.size() << " phenomena -> "
          << out.string() << "\n";
  }

  // -- crossdomain ----------------------------------------------------------

  struct {
    std::string train, test, features = "unigram", phenomena, tag, out = ".";
    std::size_t top_terms = 25;
    TrainArgs trainer;
    BackendArgs backend;
  } xd_;

  void add_crossdomain() {
    auto* sub = add_sub("crossdomain", "Train on one corpus, evaluate on another", xd_.out,
                        [this](Context& c, const CLI::App& s) { do_crossdomain(c, s); });
    sub->add_option("--train", xd_.train, "Training corpus")->required();
    sub->add_option("--test", xd_.test, "Test corpus")->required();
    sub->add_option("--features", xd_.features, "unigram, phenomena or both")
        ->check(CLI::IsMember({"unigram", "phenomena", "both", "unigram+phenomena"}));
    sub->add_option("--phenomena", xd_.phenomena, "Phenomena JSONL (phenomena, both)");
    sub->add_option("--top-terms", xd_.top_terms, "Strongest coefficients listed per label");
    sub->add_option("--tag", xd_.tag, "Output file stem (default crossdomain-<features>)");
    xd_.trainer.add_to(sub);
    xd_.backend.add_to(sub);
  }

  void do_crossdomain(Context& c, const CLI::App& s) {
    const auto& a = xd_;
    const FeatureSet feats = parse_feature_set(a.features);
    std::vector<Phenomenon> ph;
    if (feats != FeatureSet::unigram) {
      if (a.phenomena.empty()) throw Error("--features " + a.features + " needs --phenomena");
      ph = read_phenomena_jsonl(a.phenomena);
    }
    const Corpus train_c = load_named(a.train), test_c = load_named(a.test);
    std::shared_ptr<const ScoringBackend> backend;
    std::unique_ptr<ScoreCache> cache;
    if (feats != FeatureSet::unigram) {
      backend = a.backend.make(a.train);
      cache = a.backend.make_cache(*backend);
    }
    CrossDomainOptions opt;
    opt.train = a.trainer.options();
    opt.stoplist = a.trainer.words();
    opt.scoring = {a.backend.parallelism, cache.get()};
    std::string feat_name(to_string(feats));
    for (char& ch : feat_name)
      if (ch == '+') ch = '-';
    const std::string stem = a.tag.empty() ? "crossdomain-" + feat_name : a.tag;
    const json cfg = resolved_config(s);
    write_snapshot(a.out, stem, cfg);
    const auto res = run_crossdomain(train_c, test_c, feats, ph, backend.get(), opt);

    std::vector<std::pair<double, std::string>> w;
    for (std::size_t j = 0; j < res.train_matrix.n_cols(); ++j)
      w.emplace_back(res.model.weights[static_cast<Eigen::Index>(j)], res.train_matrix.columns[j]);
    auto top = [&](bool deceptive) {
      auto v = w;
      std::sort(v.begin(), v.end(), [&](const auto& x, const auto& y) {
        if (x.first != y.first) return deceptive ? x.first > y.first : x.first < y.first;
        return x.second < y.second;
      });
      json out = json::array();
      for (std::size_t i = 0; i < std::min(a.top_terms, v.size()); ++i)
        out.push_back({{"term", v[i].second}, {"beta", v[i].first}});
      return out;
    };
    const fs::path out = fs::path(a.out) / (stem + ".json");
    write_json(out, {{"config", cfg},
                     {"feature_set", to_string(feats)},
                     {"n_train", train_c.size()},
                     {"n_test", test_c.size()},
                     {"n_features", res.train_matrix.n_cols()},
                     {"converged", res.model.converged},
                     {"metrics", to_json(res.metrics)},
                     {"top_terms", {{"deceptive", top(true)}, {"genuine", top(false)}}}});
    c.out << stem << ": " << fmt_metrics(res.metrics) << "\n";
  }

  // -- report ---------------------------------------------------------------

  struct {
    std::string id, title, out = ".";
    std::vector<std::string> inputs;
  } rep_;

  void add_report() {
    auto* sub = add_sub("report", "Collect metrics from artifacts into JSON and a table", rep_.out,
                        [this](Context& c, const CLI::App& s) { do_report(c, s); });
    sub->add_option("--id", rep_.id, "Report id; also the output file stem")->required();
    sub->add_option("--title", rep_.title, "Table heading");
    sub->add_option("--input", rep_.inputs,
                    "Prediction set (.jsonl), cues.folds.json or crossdomain JSON; one row each")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  }

  void do_report(Context& c, const CLI::App& s) {
    const auto& a = rep_;
    ExperimentReport r;
    r.id = a.id;
    r.title = a.title;
    r.config = resolved_config(s);
    json inputs_cfg = json::object();
    for (const auto& in : a.inputs) {
      const fs::path p(in);
      if (!fs::exists(p)) throw Error("input not found: " + in);
      std::string name = p.stem().string();
      if (p.extension() == ".json" && name.size() > 6 && name.ends_with(".folds"))
        name.resize(name.size() - 6);
      Metrics m;
      if (p.extension() == ".jsonl") {
        m = read_prediction_set(p).metrics();
      } else {
        const json j = json::parse(read_file(p));
        if (j.contains("mean")) m = metrics_from_json(j.at("mean"));
        else if (j.contains("metrics")) m = metrics_from_json(j.at("metrics"));
        else throw Error(in + " holds no metrics");
        if (j.contains("config")) inputs_cfg[name] = j.at("config");
      }
      r.rows.push_back({name, m});
      r.artifacts[name] = fs::relative(fs::absolute(p), fs::absolute(a.out)).generic_string();
    }
    r.config["inputs"] = inputs_cfg;
    fs::create_directories(a.out);
    const auto er = emit_report(r, a.out);
    write_snapshot(a.out, "report-" + a.id, resolved_config(s));
    c.out << report_markdown(r);
    c.out << "wrote " << er.json_path.string() << " and " << er.markdown_path.string() << "\n";
  }

  CLI::App app_;
  std::string config_path_;
  std::vector<std::pair<CLI::App*, Handler>> handlers_;
};

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  App app;
  return app.run(args, out, err);
}

}  // namespace lexcue::cli
