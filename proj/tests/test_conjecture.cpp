#include <gtest/gtest.h>

#include <regex>

#include "support.hpp"

using namespace lexcue;
using namespace lexcue::testing;

namespace {

CueSet thirty_cues() {
  CueSet c;
  c.genuine = {"location", "floor",  "bathroom", "street", "block", "small",  "walk",  "night",
               "bed",      "door",   "elevator", "lobby",  "view",  "rate",   "star",  "desk"};
  c.deceptive = {"chicago", "hotel",  "luxury",   "experience", "husband", "family", "vacation",
                 "amazing", "staying", "recommend", "definitely", "visit",  "wife",   "business"};
  return c;
}

std::size_t whole_word_count(const std::string& hay, const std::string& word) {
  const std::regex re("\\b" + word + "\\b");
  return static_cast<std::size_t>(
      std::distance(std::sregex_iterator(hay.begin(), hay.end(), re), std::sregex_iterator()));
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(Prompt, PredictiveWordsListsEveryTermOnce) {
  const auto cues = thirty_cues();
  ASSERT_EQ(cues.size(), 30u);
  const auto r = build_conjecture_prompt(PhenomenonSource::predictive_words, cues);
  EXPECT_EQ(r.system,
            "You are an expert in deception detection. You will be provided a list of words that are "
            "most predictive of genuine or deceptive Chicago hotel reviews. Your task is to identify "
            "language phenomena or psycholinguistic patterns that appear in genuine and deceptive hotel "
            "reviews and are related to these words.");
  for (Label l : kLabels)
    for (const auto& t : cues.of(l)) EXPECT_EQ(whole_word_count(r.user, t), 1u) << t;
  EXPECT_EQ(r.user.find("Review "), std::string::npos);
  EXPECT_NE(r.user.find("GENUINE:"), std::string::npos);
  EXPECT_NE(r.user.find("DECEPTIVE:"), std::string::npos);
}

TEST(Prompt, TermsSitUnderTheirOwnLabel) {
  const auto r = build_conjecture_prompt(PhenomenonSource::predictive_words, thirty_cues());
  const auto g = r.user.find("genuine reviews:"), d = r.user.find("deceptive reviews:");
  ASSERT_LT(g, d);
  EXPECT_GT(r.user.find("location"), g);
  EXPECT_LT(r.user.find("location"), d);
  EXPECT_GT(r.user.find("luxury"), d);
}

TEST(Prompt, PriorKnowledgeHasNoInput) {
  const auto r = build_conjecture_prompt(PhenomenonSource::prior_knowledge, std::monostate{});
  EXPECT_NE(r.system.find(prompts::kExpert), std::string::npos);
  for (const auto& t : thirty_cues().deceptive) EXPECT_EQ(whole_word_count(r.user, t), 0u) << t;
  EXPECT_EQ(r.user.find("Review "), std::string::npos);
  EXPECT_EQ(r.user.find("predictive"), std::string::npos);
  EXPECT_EQ(r.system.find("provided"), std::string::npos);
}

TEST(Prompt, SampledReviewsEmbedsEachReviewWithLabel) {
  const auto recs = sample_balanced(Corpus("s", synthetic_reviews(100, 4, 12)), 30, 3);
  ASSERT_EQ(recs.size(), 60u);
  const auto r = build_conjecture_prompt(PhenomenonSource::sampled_reviews, recs);
  EXPECT_EQ(count(r.user, "Review "), 60u);
  EXPECT_EQ(count(r.user, "(genuine):"), 30u);
  EXPECT_EQ(count(r.user, "(deceptive):"), 30u);
  for (const auto& rec : recs) EXPECT_NE(r.user.find(rec.text), std::string::npos);
  EXPECT_EQ(r.user.find("predictive"), std::string::npos);
  // Same structure as the words prompt; only the input description differs.
  EXPECT_TRUE(r.system.starts_with(prompts::kExpert));
  EXPECT_NE(r.system.find("sample of genuine and deceptive Chicago hotel reviews"), std::string::npos);
}

TEST(Prompt, PayloadMustMatchSource) {
  EXPECT_THROW(build_conjecture_prompt(PhenomenonSource::predictive_words, std::monostate{}), Error);
  EXPECT_THROW(build_conjecture_prompt(PhenomenonSource::predictive_words, CueSet{}), Error);
  EXPECT_THROW(build_conjecture_prompt(PhenomenonSource::prior_knowledge, thirty_cues()), Error);
  EXPECT_THROW(build_conjecture_prompt(PhenomenonSource::sampled_reviews, thirty_cues()), Error);
  EXPECT_THROW(build_conjecture_prompt(PhenomenonSource::sampled_reviews, std::vector<ReviewRecord>{}),
               Error);
}

TEST(Parse, OnePerPolarity) {
  const auto ps = parse_phenomena("DECEPTIVE: overemphasizes luxury.\nGENUINE: cites specific locations.");
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_EQ(ps[0].polarity, Label::deceptive);
  EXPECT_EQ(ps[0].statement, "overemphasizes luxury.");
  EXPECT_EQ(ps[1].polarity, Label::genuine);
}

TEST(Parse, UnlabeledLineSkipped) {
  const auto r = parse_phenomena_detailed("Here are some patterns:\nGENUINE: mentions floors.\n");
  EXPECT_EQ(r.phenomena.size(), 1u);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0], "Here are some patterns:");
}

TEST(Parse, EmptyDedupAndCase) {
  EXPECT_TRUE(parse_phenomena("").empty());
  EXPECT_EQ(parse_phenomena("GENUINE: a.\nGENUINE: a.").size(), 1u);
  EXPECT_EQ(parse_phenomena("GENUINE: a.\ngenuine:   A.").size(), 1u);
  const auto ps = parse_phenomena("Deceptive: vague praise.\n- **genuine**: room numbers.\n2. DECEPTIVE | lists amenities");
  ASSERT_EQ(ps.size(), 3u);
  EXPECT_EQ(ps[0].polarity, Label::deceptive);
  EXPECT_EQ(ps[1].statement, "room numbers.");
  EXPECT_EQ(ps[2].statement, "lists amenities");
}

TEST(Parse, TagWithoutStatementSkipped) {
  const auto r = parse_phenomena_detailed("GENUINE:\nDECEPTIVE: x\nGENUINEness is rare");
  EXPECT_EQ(r.phenomena.size(), 1u);
  EXPECT_EQ(r.skipped.size(), 2u);
}

TEST(Phenomenon, IdIgnoresCaseAndSpacingButNotPolarity) {
  EXPECT_EQ(phenomenon_id(Label::genuine, "Cites  Streets"), phenomenon_id(Label::genuine, "cites streets"));
  EXPECT_NE(phenomenon_id(Label::genuine, "x"), phenomenon_id(Label::deceptive, "x"));
  EXPECT_EQ(phenomenon_id(Label::genuine, "x").size(), 16u);
}

TEST(Format, ParseIsLeftInverse) {
  std::mt19937_64 rng(4);
  const std::vector<std::string> words{"short", "Luxury", "rooms", "detail", "vague", "Praise", "city"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Phenomenon> ps;
    const auto n = rng() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      std::string s;
      for (std::size_t w = 0; w < 1 + rng() % 6; ++w) s += (s.empty() ? "" : " ") + words[rng() % words.size()];
      ps.push_back(make_phenomenon(rng() % 2 ? Label::deceptive : Label::genuine, s + "."));
    }
    const auto f = format_phenomena(ps);
    EXPECT_EQ(format_phenomena(parse_phenomena(f)), format_phenomena(parse_phenomena(format_phenomena(parse_phenomena(f)))));
    // Without duplicates, parse recovers the list itself.
    std::set<std::string> ids;
    bool dup = false;
    for (const auto& p : ps) dup |= !ids.insert(p.id).second;
    if (!dup) {
      EXPECT_EQ(format_phenomena(parse_phenomena(f)), f);
    }
  }
}

TEST(Jsonl, RoundTripAndIdCheck) {
  TempDir d;
  auto ps = parse_phenomena("GENUINE: a.\nDECEPTIVE: b.");
  ps[0].provider_id = "mock-1";
  ps[0].timestamp = "1970-01-01T00:00:00Z";
  std::ofstream(d / "p.jsonl") << phenomena_to_jsonl(ps);
  EXPECT_EQ(read_phenomena_jsonl(d / "p.jsonl"), ps);
  std::ofstream(d / "bad.jsonl") << R"({"id":"0000","polarity":"genuine","statement":"a."})" "\n";
  EXPECT_THROW(read_phenomena_jsonl(d / "bad.jsonl"), Error);
}

TEST(Conjecture, ThroughGatewayWithProvenance) {
  auto mock = std::make_shared<MockProvider>("mock-7", seeded_mock_responder(7));
  Gateway gw(mock, std::nullopt);
  const auto req = build_conjecture_prompt(PhenomenonSource::prior_knowledge, std::monostate{});
  const auto r = conjecture_phenomena(gw, req, PhenomenonSource::prior_knowledge);
  ASSERT_FALSE(r.phenomena.empty());
  for (const auto& p : r.phenomena) {
    EXPECT_EQ(p.source, PhenomenonSource::prior_knowledge);
    EXPECT_EQ(p.provider_id, "mock-7");
    EXPECT_FALSE(p.timestamp.empty());
  }
}

TEST(Conjecture, ReminderRetriesThenError) {
  std::atomic<int> calls{0};
  auto mock = std::make_shared<MockProvider>("m", [&](const ChatRequest& r) -> std::string {
    ++calls;
    return r.user.find(prompts::kFormatReminder) != std::string::npos && calls == 3 ? "GENUINE: finally."
                                                                                    : "no idea";
  });
  Gateway gw(mock, std::nullopt);
  const auto req = build_conjecture_prompt(PhenomenonSource::prior_knowledge, std::monostate{});
  const auto r = conjecture_phenomena(gw, req, PhenomenonSource::prior_knowledge);
  EXPECT_EQ(r.phenomena.size(), 1u);
  EXPECT_EQ(calls.load(), 3);
  EXPECT_FALSE(r.warnings.empty());

  auto never = std::make_shared<MockProvider>("n", [](const ChatRequest&) { return std::string("nothing"); });
  Gateway gw2(never, std::nullopt);
  EXPECT_THROW(conjecture_phenomena(gw2, req, PhenomenonSource::prior_knowledge), Error);
  EXPECT_EQ(never->calls(), 3u);
}
