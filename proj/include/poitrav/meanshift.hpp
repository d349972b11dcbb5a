#pragma once

// Mean-Shift mode seeking over POI coordinates. The modes become the initial
// centers (and their count the K) of the seeded K-means.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "poitrav/csv.hpp"
#include "poitrav/error.hpp"
#include "poitrav/geo.hpp"
#include "poitrav/labels.hpp"
#include "poitrav/spatial_grid.hpp"

namespace poitrav {

enum class Kernel { flat, gaussian };

struct MeanShiftConfig {
  double bandwidth_h = 500.0;  // meters
  double epsilon = 1.0;        // meters
  Kernel kernel = Kernel::flat;
  int max_iter = 300;
  double merge_radius = 250.0;  // meters

  void validate() const {
    if (!(bandwidth_h > 0.0) || !std::isfinite(bandwidth_h)) {
      throw ConfigError("meanshift bandwidth must be > 0");
    }
    if (!(epsilon > 0.0)) throw ConfigError("meanshift epsilon must be > 0");
    if (max_iter < 1) throw ConfigError("meanshift max_iter must be >= 1");
    if (!(merge_radius >= 0.0)) throw ConfigError("meanshift merge_radius must be >= 0");
  }
};

struct SeedSet {
  std::vector<GeoPoint> seeds;
  std::vector<std::size_t> member_count;
  std::optional<PoiLabel> source_label;
  /// Seed index for every input point, in input order.
  std::vector<std::size_t> assignment;

  std::size_t size() const { return seeds.size(); }
};

namespace detail {

// Gaussian profile beyond this many bandwidths weighs < 1.6e-8 and is cut.
inline constexpr double kGaussianCutoff = 6.0;

template <class IndexRange>
std::optional<Offset> shift_over(const GeoPoint& x, std::span<const GeoPoint> points,
                                 const IndexRange& indices, const MeanShiftConfig& cfg) {
  const LocalFrame frame(x);
  double sw = 0.0, se = 0.0, sn = 0.0;
  const double h = cfg.bandwidth_h;
  for (const auto i : indices) {
    const GeoPoint& p = points[i];
    const double d = detail::haversine_unchecked(x, p);
    double w;
    if (cfg.kernel == Kernel::flat) {
      if (!(d < h)) continue;
      w = 1.0;
    } else {
      const double u = d / h;
      w = std::exp(-0.5 * u * u);
      if (w == 0.0) continue;
    }
    const Offset o = frame.to_local(p);
    sw += w;
    se += w * o.east;
    sn += w * o.north;
  }
  if (sw == 0.0) return std::nullopt;
  return Offset{se / sw, sn / sw};
}

struct IotaRange {
  std::size_t n;
  struct It {
    std::size_t i;
    std::size_t operator*() const { return i; }
    It& operator++() {
      ++i;
      return *this;
    }
    bool operator!=(const It& o) const { return i != o.i; }
  };
  It begin() const { return {0}; }
  It end() const { return {n}; }
};

}  // namespace detail

/// Mean-Shift displacement of `x` toward the local density maximum, in meters
/// east/north of x. Flat kernel: offset to the mean of the points strictly
/// within the bandwidth. Gaussian: kernel-weighted mean offset over every
/// point. nullopt means the window is empty ("isolated point").
inline std::optional<Offset> mean_shift_vector(const GeoPoint& x, std::span<const GeoPoint> points,
                                               const MeanShiftConfig& cfg) {
  require_valid(x);
  return detail::shift_over(x, points, detail::IotaRange{points.size()}, cfg);
}

namespace detail {

class HillClimber {
 public:
  HillClimber(std::span<const GeoPoint> points, const MeanShiftConfig& cfg)
      : points_(points),
        cfg_(cfg),
        grid_(points, cfg.kernel == Kernel::flat ? cfg.bandwidth_h
                                                 : cfg.bandwidth_h * kGaussianCutoff) {}

  GeoPoint climb(GeoPoint x) {
    for (int it = 0; it < cfg_.max_iter; ++it) {
      grid_.candidates(x, scratch_);
      const auto v = shift_over(x, points_, scratch_, cfg_);
      if (!v || v->norm() < cfg_.epsilon) break;
      x = displace(x, *v);
    }
    return x;
  }

 private:
  std::span<const GeoPoint> points_;
  const MeanShiftConfig& cfg_;
  SpatialGrid grid_;
  std::vector<std::uint32_t> scratch_;
};

struct Mode {
  GeoPoint at;
  std::size_t count;
};

inline GeoPoint weighted_midpoint(const Mode& a, const Mode& b) {
  const LocalFrame f(a.at);
  const Offset ob = f.to_local(b.at);
  const double t = static_cast<double>(b.count) / static_cast<double>(a.count + b.count);
  return f.to_geo({ob.east * t, ob.north * t});
}

}  // namespace detail

/// Runs a hill climb from every point (input order), merges modes closer
/// than merge_radius (count-weighted), then re-climbs merged seeds so each
/// one is a fixed point of the shift. Isolated points become singleton modes.
inline SeedSet mean_shift_cluster(std::span<const GeoPoint> points, const MeanShiftConfig& cfg,
                                  std::optional<PoiLabel> label = std::nullopt) {
  cfg.validate();
  if (points.empty()) throw InputError("mean_shift_cluster needs at least one point");
  for (const auto& p : points) require_valid(p);

  detail::HillClimber climber(points, cfg);
  std::vector<detail::Mode> modes;
  std::vector<std::size_t> owner(points.size());

  auto find_near = [&](const GeoPoint& at, std::size_t skip) -> std::optional<std::size_t> {
    for (std::size_t m = 0; m < modes.size(); ++m) {
      if (m == skip || modes[m].count == 0) continue;
      if (detail::haversine_unchecked(modes[m].at, at) <= cfg.merge_radius) return m;
    }
    return std::nullopt;
  };

  for (std::size_t i = 0; i < points.size(); ++i) {
    const GeoPoint mode = climber.climb(points[i]);
    if (const auto m = find_near(mode, static_cast<std::size_t>(-1))) {
      detail::Mode& target = modes[*m];
      target.at = detail::weighted_midpoint(target, {mode, 1});
      ++target.count;
      owner[i] = *m;
    } else {
      owner[i] = modes.size();
      modes.push_back({mode, 1});
    }
  }

  // Polish merged seeds onto true fixed points; fold together any that end
  // up within merge_radius of each other and polish again.
  std::vector<std::size_t> redirect(modes.size());
  for (std::size_t m = 0; m < modes.size(); ++m) redirect[m] = m;
  for (bool changed = true; changed;) {
    changed = false;
    for (auto& m : modes) {
      if (m.count) m.at = climber.climb(m.at);
    }
    for (std::size_t m = 0; m < modes.size(); ++m) {
      if (modes[m].count == 0) continue;
      const auto other = find_near(modes[m].at, m);
      if (other && *other < m) {
        modes[*other].at = detail::weighted_midpoint(modes[*other], modes[m]);
        modes[*other].count += modes[m].count;
        modes[m].count = 0;
        redirect[m] = *other;
        changed = true;
      }
    }
  }

  SeedSet out;
  out.source_label = label;
  std::vector<std::size_t> final_index(modes.size(), 0);
  for (std::size_t m = 0; m < modes.size(); ++m) {
    if (modes[m].count == 0) continue;
    final_index[m] = out.seeds.size();
    out.seeds.push_back(modes[m].at);
    out.member_count.push_back(modes[m].count);
  }
  out.assignment.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::size_t m = owner[i];
    while (redirect[m] != m) m = redirect[m];
    out.assignment[i] = final_index[m];
  }
  return out;
}

/// Serializes seed sets as `label,lng,lat,member_count`.
inline std::string seeds_to_csv(std::span<const SeedSet> sets) {
  csv::Writer w;
  w.row({"label", "lng", "lat", "member_count"});
  for (const auto& s : sets) {
    const std::string label = s.source_label ? std::string(label_name(*s.source_label)) : "";
    for (std::size_t i = 0; i < s.seeds.size(); ++i) {
      w.row({label, fmt::format("{}", s.seeds[i].lng), fmt::format("{}", s.seeds[i].lat),
             fmt::format("{}", s.member_count[i])});
    }
  }
  return w.str();
}

/// Reads `label,lng,lat,member_count` back into one SeedSet per label, in
/// first-appearance order. Assignments are not stored and come back empty.
inline std::vector<SeedSet> seeds_from_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0].size() < 4) throw InputError("malformed seeds header");
  std::vector<SeedSet> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < 4) throw InputError(fmt::format("seeds line {}: too few fields", r + 1));
    std::optional<PoiLabel> label;
    if (!row[0].empty()) {
      label = label_from_name(row[0]);
      if (!label) throw InputError("seeds: unknown label " + row[0]);
    }
    GeoPoint p;
    std::size_t count = 0;
    if (!csv::parse_double(row[1], p.lng) || !csv::parse_double(row[2], p.lat) ||
        !csv::parse_int(row[3], count) || !is_valid(p)) {
      throw InputError(fmt::format("seeds line {}: malformed", r + 1));
    }
    if (out.empty() || out.back().source_label != label) {
      out.push_back({});
      out.back().source_label = label;
    }
    out.back().seeds.push_back(p);
    out.back().member_count.push_back(count);
  }
  return out;
}

}  // namespace poitrav
