#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

namespace poitrav {

/// The seventeen retained POI industry labels, in record-name order.
enum class PoiLabel : int {
  food = 0,
  hotel,
  shopping,
  service,
  beauty,
  travel,
  entertainment,
  sports,
  education,
  media,
  medicine,
  car,
  traffic,
  finance,
  estate,
  company,
  government,
};

inline constexpr std::size_t kNumLabels = 17;

inline constexpr std::array<PoiLabel, kNumLabels> kAllLabels = {
    PoiLabel::food,          PoiLabel::hotel,     PoiLabel::shopping,
    PoiLabel::service,       PoiLabel::beauty,    PoiLabel::travel,
    PoiLabel::entertainment, PoiLabel::sports,    PoiLabel::education,
    PoiLabel::media,         PoiLabel::medicine,  PoiLabel::car,
    PoiLabel::traffic,       PoiLabel::finance,   PoiLabel::estate,
    PoiLabel::company,       PoiLabel::government};

inline constexpr std::array<std::string_view, kNumLabels> kLabelNames = {
    "food",   "hotel",    "shopping", "service",   "beauty",  "travel",
    "entertainment",      "sports",   "education", "media",   "medicine",
    "car",    "traffic",  "finance",  "estate",    "company", "government"};

// Map-provider category names, same order as kLabelNames.
inline constexpr std::array<std::string_view, kNumLabels> kCategoryNames = {
    "delicious food",
    "hotel",
    "shopping",
    "life services",
    "beauty",
    "tourist attractions",
    "leisure and entertainment",
    "fitness",
    "educational training",
    "culture and media",
    "medical treatment",
    "car services",
    "traffic facilities",
    "financial",
    "property",
    "incorporated business",
    "government institutional"};

// Categories that exist upstream but carry no travel purpose.
inline constexpr std::array<std::string_view, 4> kExcludedCategories = {
    "entrances and exits", "natural features", "administrative landmark",
    "gate address"};

inline constexpr std::size_t index_of(PoiLabel l) {
  return static_cast<std::size_t>(l);
}

inline std::string_view label_name(PoiLabel l) { return kLabelNames[index_of(l)]; }

namespace detail {

inline std::string normalize_token(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out;
  out.reserve(e - b);
  bool space = false;
  for (std::size_t i = b; i < e; ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

}  // namespace detail

enum class LabelParse { ok, excluded, unknown };

struct LabelParseResult {
  LabelParse status = LabelParse::unknown;
  PoiLabel label = PoiLabel::food;
};

/// Accepts either the record name ("food") or the upstream category name
/// ("Delicious Food"), case-insensitively.
inline LabelParseResult parse_label(std::string_view text) {
  const std::string t = detail::normalize_token(text);
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (t == kLabelNames[i] || t == kCategoryNames[i]) {
      return {LabelParse::ok, kAllLabels[i]};
    }
  }
  if (std::find(kExcludedCategories.begin(), kExcludedCategories.end(), t) !=
      kExcludedCategories.end()) {
    return {LabelParse::excluded, PoiLabel::food};
  }
  return {LabelParse::unknown, PoiLabel::food};
}

inline std::optional<PoiLabel> label_from_name(std::string_view text) {
  const auto r = parse_label(text);
  if (r.status != LabelParse::ok) return std::nullopt;
  return r.label;
}

}  // namespace poitrav
