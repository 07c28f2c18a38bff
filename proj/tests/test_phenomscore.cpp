#include <gtest/gtest.h>

#include "support.hpp"

using namespace lexcue;
using namespace lexcue::testing;

namespace {

FeatureMatrix one_column(std::vector<double> values) {
  FeatureMatrix fm;
  fm.columns = {"p"};
  fm.kinds = {ColumnKind::phenomenon};
  for (std::size_t i = 0; i < values.size(); ++i) {
    fm.row_ids.push_back("r" + std::to_string(i));
    fm.labels.push_back(Label::genuine);
    SparseVector row;
    row.push(0, values[i]);
    fm.rows.push_back(row);
  }
  return fm;
}

std::vector<double> column(const FeatureMatrix& fm, std::size_t c) {
  std::vector<double> out;
  for (std::size_t r = 0; r < fm.n_rows(); ++r) out.push_back(fm.at(r, c));
  return out;
}

std::vector<Phenomenon> nine() {
  std::vector<Phenomenon> ps;
  const char* stmts[] = {"mention the floor number", "describe small rooms", "name nearby streets",
                         "praise luxury", "talk about a husband", "call it an experience",
                         "repeat the city name", "complain about noise", "recommend the hotel"};
  for (int i = 0; i < 9; ++i) ps.push_back(make_phenomenon(i % 2 ? Label::deceptive : Label::genuine, stmts[i]));
  return ps;
}

}  // namespace

TEST(Score, UniformTableThreeTokens) {
  auto be = TableBackend::uniform({"a", "b"});
  const auto p = make_phenomenon(Label::genuine, "is short.");
  const auto s = score_review(be, p, {"r", "a b a", Label::genuine, "d", {}});
  EXPECT_EQ(s.n_tokens, 3u);
  EXPECT_EQ(s.n_unk, 0u);
  EXPECT_NEAR(s.sum_logprob, -2.0794, 1e-4);
  EXPECT_NEAR(s.sum_logprob, 3 * std::log(0.5), 1e-12);
  EXPECT_NEAR(s.mean_logprob, -0.6931, 1e-4);
}

TEST(Score, FailsOnUnknownTokenWithoutUnk) {
  TableBackend be({{"a", 1.0}});
  EXPECT_THROW(score_review(be, make_phenomenon(Label::genuine, "x"), {"r", "a b", Label::genuine, "d", {}}),
               Error);
}

TEST(Score, PrefixTemplate) {
  EXPECT_EQ(scoring_prefix(make_phenomenon(Label::genuine, "mentions the floor.")),
            "Write a hotel review that mentions the floor:");
}

TEST(Score, HandComputedBigram) {
  // Counts from "a b a b": "" -> a:1, a -> b:2, b -> a:1. V = 3.
  NgramBackend be(std::make_shared<const NgramLM>(fit_ngram_lm({"a b a b"}, 2, 1.0)));
  const auto p = make_phenomenon(Label::genuine, "ends with q");
  // Prefix ends in "q" (unknown): P(b | <unk>) = 1/3, then P(a | b) = (1+1)/(1+3).
  const auto s = score_review(be, p, {"r", "b a", Label::genuine, "d", {}});
  EXPECT_NEAR(s.sum_logprob, std::log(1.0 / 3.0) + std::log(0.5), 1e-12);
  EXPECT_EQ(s.n_unk, 0u);
}

TEST(Score, ExpOfSumIsTheProduct) {
  auto base = std::make_shared<NgramBackend>(
      std::make_shared<const NgramLM>(fit_ngram_lm({"the room was small", "the view was amazing"}, 2, 0.5)));
  PrefixCacheBackend be(base, 0.1);
  std::mt19937_64 rng(1);
  const std::vector<std::string> words{"the", "room", "was", "small", "view", "amazing", "odd"};
  const auto p = make_phenomenon(Label::deceptive, "describes the view");
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    const auto n = 1 + rng() % 10;
    for (std::size_t i = 0; i < n; ++i) text += words[rng() % words.size()] + " ";
    const auto s = score_review(be, p, {"r", text, Label::genuine, "d", {}});
    auto ctx = lm_tokens(scoring_prefix(p));
    double prod = 1.0;
    for (const auto& t : lm_tokens(text)) {
      prod *= std::exp(be.logprob(ctx, t));
      ctx.push_back(t);
    }
    EXPECT_NEAR(std::exp(s.sum_logprob), prod, 1e-9);
    EXPECT_NEAR(s.mean_logprob * static_cast<double>(s.n_tokens), s.sum_logprob, 1e-9);
    EXPECT_LE(s.sum_logprob, 0.0);
  }
}

TEST(Matrix, NinePhenomenaShape) {
  const Corpus c("tc", synthetic_reviews(240, 2, 20, false, "tc", 400));
  ASSERT_EQ(c.size(), 480u);
  std::vector<std::string> texts;
  for (const auto& r : c.records()) texts.push_back(r.text);
  NgramBackend be(std::make_shared<const NgramLM>(fit_ngram_lm(texts, 2, 1.0)));
  const auto fm = build_feature_matrix(c, nine(), &be, false, nullptr, nullptr);
  EXPECT_EQ(fm.n_rows(), 480u);
  EXPECT_EQ(fm.n_cols(), 9u);
  EXPECT_TRUE(std::is_sorted(fm.row_ids.begin(), fm.row_ids.end()));

  const auto stop = default_stoplist();
  std::vector<TokenSeq> docs;
  for (const auto& r : c.records()) docs.push_back(tokenize(r.text, stop));
  const auto tfidf = fit_tfidf(docs);
  const auto both = build_feature_matrix(c, nine(), &be, true, &tfidf, &stop);
  EXPECT_EQ(both.n_cols(), tfidf.size() + 9);
  EXPECT_EQ(both.kinds.back(), ColumnKind::phenomenon);
  EXPECT_EQ(both.kinds.front(), ColumnKind::unigram);
}

TEST(Matrix, NoPhenomenaIsTheTextpipeMatrix) {
  const Corpus c("u", synthetic_reviews(15, 4, 20));
  const auto stop = default_stoplist();
  std::vector<TokenSeq> docs;
  for (const auto& r : c.records()) docs.push_back(tokenize(r.text, stop));
  const auto tfidf = fit_tfidf(docs);
  const auto fm = build_feature_matrix(c, {}, nullptr, true, &tfidf, &stop);
  ASSERT_EQ(fm.n_rows(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(fm.rows[i], vectorize(docs[i], tfidf));
  EXPECT_EQ(fm.columns, tfidf.terms());
}

TEST(Matrix, ArgumentContracts) {
  const Corpus c("u", synthetic_reviews(2, 4, 5));
  const auto stop = default_stoplist();
  auto be = TableBackend::uniform({"<unk>"});
  EXPECT_THROW(build_feature_matrix(c, {}, &be, false, nullptr, nullptr), Error);
  EXPECT_THROW(build_feature_matrix(c, nine(), nullptr, false, nullptr, nullptr), Error);
  EXPECT_THROW(build_feature_matrix(c, {}, nullptr, true, nullptr, &stop), Error);
}

TEST(Matrix, InputOrderDoesNotMatter) {
  auto recs = synthetic_reviews(20, 7, 15);
  const Corpus a("a", recs);
  std::reverse(recs.begin(), recs.end());
  const Corpus b("a", recs);
  const auto s = planted_setup();
  const auto fa = build_feature_matrix(a, s.phenomena, s.backend.get(), false, nullptr, nullptr);
  ScoringOptions par;
  par.parallelism = 3;
  const auto fb = build_feature_matrix(b, s.phenomena, s.backend.get(), false, nullptr, nullptr, par);
  EXPECT_EQ(feature_matrix_to_csv(fa), feature_matrix_to_csv(fb));
}

TEST(Matrix, CsvHeader) {
  auto fm = one_column({-1.5, 2.0});
  const auto csv = feature_matrix_to_csv(fm);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "review_id,p");
  EXPECT_NE(csv.find("r0,-1.5\n"), std::string::npos);
}

TEST(Standardize, TwoPoints) {
  const auto [tr, te] = standardize(one_column({1, 3}), one_column({1, 3}));
  EXPECT_EQ(column(tr, 0), (std::vector<double>{-1, 1}));
}

TEST(Standardize, ConstantColumnBecomesZero) {
  const auto [tr, te] = standardize(one_column({5, 5, 5}), one_column({7}));
  EXPECT_EQ(column(tr, 0), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(column(te, 0), (std::vector<double>{0}));
}

TEST(Standardize, TestUsesTrainParameters) {
  // the raw 0 must be treated as a value, not as a missing entry
  const auto [tr, te] = standardize(one_column({0, 2}), one_column({4, 0}));
  EXPECT_EQ(column(te, 0), (std::vector<double>{3, -1}));
  EXPECT_EQ(column(tr, 0), (std::vector<double>{-1, 1}));
}

TEST(Standardize, TrainingColumnsHaveUnitMoments) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(-4.0, 0.7);
  std::vector<double> v;
  for (int i = 0; i < 200; ++i) v.push_back(nd(rng));
  const auto tr = standardize(one_column(v), one_column({0})).first;
  const auto z = column(tr, 0);
  double m = 0, ss = 0;
  for (double x : z) m += x;
  m /= static_cast<double>(z.size());
  for (double x : z) ss += (x - m) * (x - m);
  EXPECT_NEAR(m, 0.0, 1e-9);
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(z.size())), 1.0, 1e-9);
}

TEST(Standardize, MismatchedColumnsRejected) {
  auto b = one_column({1});
  b.columns = {"q"};
  EXPECT_THROW(standardize(one_column({1, 2}), b), Error);
}

TEST(ScoreCacheFile, RoundTripAndReuse) {
  TempDir d;
  const auto s = planted_setup();
  const Corpus c("pc", planted_reviews(s, 5, 3, 8, "pc"));
  std::vector<std::vector<ScoreRecord>> first;
  {
    ScoreCache cache(d.path(), s.backend->fingerprint());
    ScoringOptions o;
    o.cache = &cache;
    first = score_corpus(c, s.phenomena, *s.backend, o);
    EXPECT_EQ(cache.size(), 20u);
    EXPECT_TRUE(fs::exists(cache.path()));
  }
  ScoreCache again(d.path(), s.backend->fingerprint());
  EXPECT_EQ(again.size(), 20u);
  // A backend that would fail proves the values come from the cache.
  TableBackend broken({{"nothing", 1.0}});
  ScoringOptions o;
  o.cache = &again;
  EXPECT_EQ(score_corpus(c, s.phenomena, broken, o), first);
  EXPECT_THROW(score_corpus(c, s.phenomena, broken), Error);

  ScoreCache other(d.path(), "different backend");
  EXPECT_EQ(other.size(), 0u);
}

TEST(Planted, PhenomenonColumnsSeparateLabels) {
  const auto s = planted_setup();
  const Corpus c("pl", planted_reviews(s, 50, 9, 30, "pl"));
  const auto fm = build_feature_matrix(c, s.phenomena, s.backend.get(), false, nullptr, nullptr);
  // genuine phenomenon is column 0; difference of the two columns splits the labels
  for (std::size_t r = 0; r < fm.n_rows(); ++r) {
    const double d = fm.at(r, 0) - fm.at(r, 1);
    EXPECT_EQ(d > 0, fm.labels[r] == Label::genuine) << fm.row_ids[r];
  }
}
