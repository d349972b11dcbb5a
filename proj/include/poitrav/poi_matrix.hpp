#pragma once

// Life circles + POIs -> per-passenger travel pattern rows over the 17 POI
// labels. Each in-radius POI adds (1 - dis/DIS) to its label, masses are
// normalized per circle, circles are combined with sqrt(N_k) weights, and
// the row is rescaled to a fixed integer total.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "poitrav/csv.hpp"
#include "poitrav/error.hpp"
#include "poitrav/geo.hpp"
#include "poitrav/ingest.hpp"
#include "poitrav/labels.hpp"
#include "poitrav/pkmeans.hpp"
#include "poitrav/spatial_grid.hpp"

namespace poitrav {

using LabelMassVector = std::array<double, kNumLabels>;

/// Distance-decayed POI mass per label inside one life circle. POIs at or
/// beyond the radius contribute nothing.
inline LabelMassVector cluster_label_mass(const LifeCircle& circle, std::span<const PoiRecord> pois) {
  if (!(circle.radius_m > 0.0)) throw ConfigError("life circle radius must be > 0");
  require_valid(circle.center);
  LabelMassVector mass{};
  for (const auto& poi : pois) {
    const double d = detail::haversine_unchecked(circle.center, poi.location);
    if (d < circle.radius_m) mass[index_of(poi.label)] += 1.0 - d / circle.radius_m;
  }
  return mass;
}

/// Same result as cluster_label_mass, bit for bit, with a grid over the POIs
/// so large POI sets are not scanned per circle. Built for one radius.
class PoiIndex {
 public:
  PoiIndex(std::span<const PoiRecord> pois, double radius_m)
      : pois_(pois), radius_(radius_m), grid_(locations(pois), radius_m) {}

  LabelMassVector mass(const LifeCircle& circle) const {
    if (circle.radius_m != radius_) return cluster_label_mass(circle, pois_);
    require_valid(circle.center);
    grid_.candidates(circle.center, scratch_);
    LabelMassVector mass{};
    for (const auto i : scratch_) {
      const auto& poi = pois_[i];
      const double d = detail::haversine_unchecked(circle.center, poi.location);
      if (d < circle.radius_m) mass[index_of(poi.label)] += 1.0 - d / circle.radius_m;
    }
    return mass;
  }

 private:
  static std::vector<GeoPoint> locations(std::span<const PoiRecord> pois) {
    std::vector<GeoPoint> out;
    out.reserve(pois.size());
    for (const auto& p : pois) out.push_back(p.location);
    return out;
  }

  std::span<const PoiRecord> pois_;
  double radius_;
  SpatialGrid grid_;
  mutable std::vector<std::uint32_t> scratch_;
};

/// Divides by the total so the masses sum to one. nullopt for an all-zero
/// vector (an empty life circle).
inline std::optional<LabelMassVector> normalize_cluster(const LabelMassVector& mass) {
  double total = 0.0;
  for (double m : mass) {
    if (m < 0.0 || !std::isfinite(m)) throw InputError("label mass must be finite and >= 0");
    total += m;
  }
  if (!(total > 0.0)) return std::nullopt;
  LabelMassVector out;
  for (std::size_t t = 0; t < kNumLabels; ++t) out[t] = mass[t] / total;
  return out;
}

struct PatternRow {
  LabelMassVector raw{};  // sum_k normalized_mass * sqrt(N_k), before rescaling
  std::array<std::int64_t, kNumLabels> counts{};
};

/// Largest-remainder rounding of `raw` rescaled to sum exactly `total`.
/// Remainder ties go to the lower label index.
inline std::array<std::int64_t, kNumLabels> round_to_total(const LabelMassVector& raw,
                                                           std::int64_t total) {
  const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
  std::array<std::int64_t, kNumLabels> out{};
  std::array<double, kNumLabels> rem{};
  std::int64_t assigned = 0;
  for (std::size_t t = 0; t < kNumLabels; ++t) {
    const double q = raw[t] / sum * static_cast<double>(total);
    const double f = std::floor(q);
    out[t] = static_cast<std::int64_t>(f);
    rem[t] = q - f;
    assigned += out[t];
  }
  std::array<std::size_t, kNumLabels> order;
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  // Floating error can leave |total - assigned| outside [0, 17); clamp by
  // walking the ranking as many times as needed.
  for (std::int64_t left = total - assigned, i = 0; left != 0; ++i) {
    const std::size_t t = order[static_cast<std::size_t>(i) % kNumLabels];
    if (left > 0) {
      if (raw[t] > 0.0) {
        ++out[t];
        --left;
      }
    } else if (out[t] > 0) {
      --out[t];
      ++left;
    }
  }
  return out;
}

/// Combines normalized circle masses with sqrt(N_k) weights and rescales to
/// `row_total`. Empty circles (nullopt masses) are skipped; nullopt when
/// nothing is left.
inline std::optional<PatternRow> passenger_pattern(
    std::span<const std::pair<LifeCircle, std::optional<LabelMassVector>>> circles,
    std::int64_t row_total = 1000) {
  if (row_total < 1) throw ConfigError("row total must be >= 1");
  PatternRow row;
  bool any = false;
  for (const auto& [circle, mass] : circles) {
    if (!mass) continue;
    const double w = std::sqrt(static_cast<double>(circle.n_k));
    for (std::size_t t = 0; t < kNumLabels; ++t) row.raw[t] += (*mass)[t] * w;
    any = any || circle.n_k > 0;
  }
  const double sum = std::accumulate(row.raw.begin(), row.raw.end(), 0.0);
  if (!any || !(sum > 0.0)) return std::nullopt;
  row.counts = round_to_total(row.raw, row_total);
  return row;
}

struct TravelPatternMatrix {
  std::vector<std::string> passengers;
  std::vector<std::array<std::int64_t, kNumLabels>> counts;
  std::int64_t row_total = 1000;

  std::size_t size() const { return passengers.size(); }
};

inline std::string matrix_to_csv(const TravelPatternMatrix& m) {
  csv::Writer w;
  std::vector<std::string> header{"uid"};
  for (auto n : kLabelNames) header.emplace_back(n);
  w.row(header);
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::vector<std::string> row{m.passengers[i]};
    for (auto c : m.counts[i]) row.push_back(fmt::format("{}", c));
    w.row(row);
  }
  return w.str();
}

/// Parses the matrix CSV. Every row must sum to the same total.
inline TravelPatternMatrix matrix_from_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0].size() != kNumLabels + 1 || rows[0][0] != "uid") {
    throw InputError("malformed matrix header");
  }
  for (std::size_t t = 0; t < kNumLabels; ++t) {
    if (rows[0][t + 1] != kLabelNames[t]) throw InputError("malformed matrix header");
  }
  TravelPatternMatrix m;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != kNumLabels + 1) {
      throw InputError(fmt::format("matrix line {}: wrong field count", r + 1));
    }
    std::array<std::int64_t, kNumLabels> c{};
    std::int64_t sum = 0;
    for (std::size_t t = 0; t < kNumLabels; ++t) {
      if (!csv::parse_int(rows[r][t + 1], c[t]) || c[t] < 0) {
        throw InputError(fmt::format("matrix line {}: bad count", r + 1));
      }
      sum += c[t];
    }
    if (m.counts.empty()) m.row_total = sum;
    if (sum != m.row_total) throw InputError(fmt::format("matrix line {}: row total differs", r + 1));
    m.passengers.push_back(rows[r][0]);
    m.counts.push_back(c);
  }
  return m;
}

}  // namespace poitrav
