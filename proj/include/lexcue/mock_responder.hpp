#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "lexcue/conjecture.hpp"
#include "lexcue/detect.hpp"
#include "lexcue/gateway.hpp"
#include "lexcue/hash.hpp"
#include "lexcue/textpipe.hpp"

namespace lexcue {

namespace detail {

inline bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

inline std::string_view canned_phenomena(PhenomenonSource s) {
  switch (s) {
    case PhenomenonSource::predictive_words:
      return "GENUINE: Genuine reviews mention concrete spatial details such as the floor, "
             "the bathroom or the walk to nearby streets.\n"
             "GENUINE: Genuine reviews report small practical annoyances alongside praise.\n"
             "DECEPTIVE: Deceptive reviews repeat the hotel and city name instead of describing "
             "the stay.\n"
             "DECEPTIVE: Deceptive reviews frame the stay around who the writer travelled with, "
             "such as a husband or family.\n"
             "DECEPTIVE: Deceptive reviews rely on generic praise words like luxury and experience.";
    case PhenomenonSource::sampled_reviews:
      return "GENUINE: Genuine reviews compare the room with expectations using specific "
             "numbers or prices.\n"
             "GENUINE: Genuine reviews describe the neighbourhood and transport options.\n"
             "DECEPTIVE: Deceptive reviews use exaggerated emotional language throughout.\n"
             "DECEPTIVE: Deceptive reviews state the purpose of the trip early on.";
    case PhenomenonSource::prior_knowledge:
      return "GENUINE: Genuine reviews contain more sensory and spatial detail.\n"
             "GENUINE: Genuine reviews mix positive and negative remarks.\n"
             "DECEPTIVE: Deceptive reviews use more first person singular pronouns.\n"
             "DECEPTIVE: Deceptive reviews contain fewer concrete details and more superlatives.";
  }
  return "";
}

inline const char* const kDeceptiveHints[] = {"chicago", "hotel", "luxury",  "my",      "husband",
                                              "family",  "experience", "vacation", "amazing"};
inline const char* const kGenuineHints[] = {"location", "floor",  "bathroom", "street",
                                            "block",    "small",  "walk",     "night"};

}  // namespace detail

/// Offline stand-in for a chat model. Conjecture requests get a fixed
/// phenomenon list per source. Zero-shot detection answers a seeded coin flip
/// per review; with phenomena in the prompt it follows a crude lexical rule,
/// so the two conditions differ.
inline MockProvider::Responder seeded_mock_responder(std::uint64_t seed) {
  return [seed](const ChatRequest& req) -> std::string {
    const std::string_view sys = req.system;
    if (detail::contains(sys, prompts::kWordsTask))
      return std::string(detail::canned_phenomena(PhenomenonSource::predictive_words));
    if (detail::contains(sys, prompts::kReviewsTask))
      return std::string(detail::canned_phenomena(PhenomenonSource::sampled_reviews));
    if (detail::contains(sys, prompts::kPriorTask))
      return std::string(detail::canned_phenomena(PhenomenonSource::prior_knowledge));
    if (detail::contains(sys, prompts::kDetectTask)) {
      if (detail::contains(sys, "Phenomena of deceptive reviews:")) {
        int score = 0;
        for (const auto& t : word_tokens(req.user, 1)) {
          for (const char* h : detail::kDeceptiveHints) score += t == h;
          for (const char* h : detail::kGenuineHints) score -= t == h;
        }
        return score > 0 ? "deceptive" : "genuine";
      }
      const std::uint64_t h = mix64(seed ^ fnv1a64(req.user));
      return (h & 1) ? "Deceptive." : "Genuine.";
    }
    throw ProviderCallError("mock responder does not recognise this request", 400, false);
  };
}

}  // namespace lexcue
