#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "lexcue/error.hpp"

namespace lexcue {

/// Review label. Deceptive is the positive class everywhere (coded as 1).
enum class Label { genuine = 0, deceptive = 1 };

inline constexpr Label kLabels[] = {Label::genuine, Label::deceptive};

inline std::string_view to_string(Label l) {
  return l == Label::deceptive ? "deceptive" : "genuine";
}

inline std::optional<Label> try_parse_label(std::string_view s) {
  if (s == "genuine") return Label::genuine;
  if (s == "deceptive") return Label::deceptive;
  return std::nullopt;
}

inline Label parse_label(std::string_view s) {
  if (auto l = try_parse_label(s)) return *l;
  throw Error("unknown label '" + std::string(s) +
              "' (expected 'genuine' or 'deceptive')");
}

inline double label_value(Label l) { return l == Label::deceptive ? 1.0 : 0.0; }

inline Label opposite(Label l) {
  return l == Label::deceptive ? Label::genuine : Label::deceptive;
}

}  // namespace lexcue
