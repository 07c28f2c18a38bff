#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace lexcue;
using namespace lexcue::testing;

namespace {

TokenSeq toks(std::initializer_list<const char*> xs) { return TokenSeq(xs.begin(), xs.end()); }

TfidfModel three_doc_model() {
  return fit_tfidf({toks({"good", "room"}), toks({"bad", "room"}), toks({"good", "view"})});
}

}  // namespace

TEST(Stoplist, ShippedFileMatchesEmbeddedCopy) {
  const auto path = fs::path(LEXCUE_SOURCE_DIR) / "data" / "stopwords_en.txt";
  EXPECT_EQ(read_file(path), default_stoplist_text());
  EXPECT_EQ(sha256_file(path), default_stoplist_hash());
  EXPECT_EQ(load_stoplist(path), default_stoplist());
}

TEST(Stoplist, KeepsWordsThatCarrySignal) {
  const auto s = default_stoplist();
  for (const char* w : {"the", "was", "and", "i", "my"}) EXPECT_TRUE(s.count(w)) << w;
  for (const char* w : {"us", "seemed", "location", "hotel", "luxury"}) EXPECT_FALSE(s.count(w)) << w;
}

TEST(Tokenize, StripsStopWordsAndPunctuation) {
  EXPECT_EQ(tokenize("The room was small!", default_stoplist()), toks({"room", "small"}));
}

TEST(Tokenize, DropsSingleCharacterTokens) {
  EXPECT_TRUE(tokenize("A I", default_stoplist()).empty());
  EXPECT_TRUE(tokenize("x y z", Stoplist{}).empty());
}

TEST(Tokenize, LowercasesIdempotently) {
  EXPECT_EQ(tokenize("Chicago CHICAGO chicago", default_stoplist()),
            toks({"chicago", "chicago", "chicago"}));
  const auto once = tokenize("Ünïcode ÉCOLE Straße ΑΒΓ", Stoplist{});
  std::string joined;
  for (const auto& t : once) joined += t + " ";
  EXPECT_EQ(tokenize(joined, Stoplist{}), once);
  EXPECT_EQ(once.front(), "ünïcode");
}

TEST(Tokenize, SplitsOnNonAlphanumerics) {
  EXPECT_EQ(tokenize("room#12, $200/night; e-mail", Stoplist{}),
            toks({"room", "12", "200", "night", "mail"}));
}

TEST(Tfidf, HandComputedIdf) {
  const auto m = three_doc_model();
  EXPECT_EQ(m.n_docs(), 3u);
  EXPECT_EQ(m.df(*m.column("good")), 2u);
  EXPECT_EQ(m.df(*m.column("bad")), 1u);
  EXPECT_NEAR(m.idf(*m.column("bad")), std::log(4.0 / 2.0) + 1.0, 1e-15);
  EXPECT_NEAR(m.idf(*m.column("bad")), 1.6931, 1e-4);
  EXPECT_EQ(m.terms(), (std::vector<std::string>{"bad", "good", "room", "view"}));
}

TEST(Tfidf, DocumentFrequencyCountsDocuments) {
  const auto m = fit_tfidf({toks({"x2", "x2"})});
  EXPECT_EQ(m.df(*m.column("x2")), 1u);
}

TEST(Tfidf, RefitIsIdentical) {
  EXPECT_EQ(three_doc_model(), three_doc_model());
  EXPECT_EQ(TfidfModel::from_json(three_doc_model().to_json()), three_doc_model());
}

TEST(Tfidf, EqualWeightsGiveInverseSqrtTwo) {
  const auto m = three_doc_model();
  const auto v = vectorize(toks({"good", "room"}), m);
  ASSERT_EQ(v.nnz(), 2u);
  EXPECT_NEAR(v.get(*m.column("good")), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(v.get(*m.column("room")), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Tfidf, OutOfVocabularyOnlyGivesEmptyVector) {
  EXPECT_TRUE(vectorize(toks({"zzz", "qqq"}), three_doc_model()).empty());
}

TEST(Tfidf, TermFrequencyRatio) {
  const auto m = three_doc_model();
  const auto v = vectorize(toks({"good", "good", "view"}), m);
  const auto g = *m.column("good"), w = *m.column("view");
  EXPECT_NEAR(v.get(g) / v.get(w), 2.0 * m.idf(g) / m.idf(w), 1e-12);
}

TEST(Tfidf, RejectsEmptyTraining) {
  EXPECT_THROW(fit_tfidf({}), Error);
  EXPECT_THROW(fit_tfidf({TokenSeq{}, TokenSeq{}}), Error);
}

TEST(Tfidf, MatchesBruteForceOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> len(0, 30), word(0, 40);
    std::vector<TokenSeq> docs(8 + trial % 5);
    for (auto& d : docs) {
      const int n = len(rng);
      for (int i = 0; i < n; ++i) d.push_back("t" + std::to_string(word(rng)));
    }
    docs[0].push_back("anchor");
    const auto model = fit_tfidf(docs);
    const auto oracle = oracle_tfidf_fit(docs);
    ASSERT_EQ(model.terms(), oracle.vocab);
    for (std::size_t j = 0; j < oracle.vocab.size(); ++j)
      ASSERT_NEAR(model.idf(j), oracle.idf[j], 1e-12);
    std::vector<TokenSeq> probes = docs;
    probes.push_back({"t1", "t1", "unseen", "t2"});
    for (const auto& d : probes) {
      const auto v = vectorize(d, model);
      const auto row = oracle_tfidf_row(oracle, d);
      for (std::size_t j = 0; j < row.size(); ++j)
        ASSERT_NEAR(v.get(static_cast<std::uint32_t>(j)), row[j], 1e-12);
    }
  }
}

TEST(Tfidf, RowsAreUnitLength) {
  const auto docs = std::vector<TokenSeq>{toks({"a1", "b1", "b1"}), toks({"c1"}), toks({"a1", "c1"})};
  const auto m = fit_tfidf(docs);
  for (const auto& d : docs) EXPECT_NEAR(vectorize(d, m).norm(), 1.0, 1e-14);
}
