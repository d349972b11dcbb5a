#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "poitrav/geo.hpp"

namespace poitrav {

/// Uniform bucket grid over a tangent-plane projection of a point set, used
/// for fixed-radius neighbor candidates. Candidates are a superset of the
/// points within `radius_m`; callers filter with the exact distance. Falls
/// back to "every point" when the set spans more than two degrees, where the
/// projection stops being trustworthy.
class SpatialGrid {
 public:
  SpatialGrid(std::span<const GeoPoint> points, double radius_m) : frame_(anchor(points)) {
    if (points.empty()) return;
    double lo_lat = points[0].lat, hi_lat = lo_lat, lo_lng = points[0].lng, hi_lng = lo_lng;
    for (const auto& p : points) {
      lo_lat = std::min(lo_lat, p.lat);
      hi_lat = std::max(hi_lat, p.lat);
      lo_lng = std::min(lo_lng, p.lng);
      hi_lng = std::max(hi_lng, p.lng);
    }
    brute_ = hi_lat - lo_lat > 2.0 || hi_lng - lo_lng > 2.0 || std::abs(hi_lat) > 80.0 ||
             std::abs(lo_lat) > 80.0 || !(radius_m > 0.0);
    n_ = points.size();
    if (brute_) return;
    cell_ = radius_m * 1.1;
    for (std::uint32_t i = 0; i < points.size(); ++i) {
      cells_[key(points[i])].push_back(i);
    }
  }

  /// Appends candidate indices near `x` to `out` (cleared first), ascending.
  void candidates(const GeoPoint& x, std::vector<std::uint32_t>& out) const {
    out.clear();
    if (brute_) {
      out.resize(n_);
      for (std::uint32_t i = 0; i < n_; ++i) out[i] = i;
      return;
    }
    const auto [cx, cy] = cell_of(x);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = cells_.find(pack(cx + dx, cy + dy));
        if (it != cells_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
      }
    }
    std::sort(out.begin(), out.end());
  }

 private:
  static GeoPoint anchor(std::span<const GeoPoint> points) {
    if (points.empty()) return {};
    double lng = 0, lat = 0;
    for (const auto& p : points) {
      lng += p.lng;
      lat += p.lat;
    }
    const double n = static_cast<double>(points.size());
    return {lng / n, lat / n};
  }

  std::pair<std::int64_t, std::int64_t> cell_of(const GeoPoint& p) const {
    const Offset o = frame_.to_local(p);
    return {static_cast<std::int64_t>(std::floor(o.east / cell_)),
            static_cast<std::int64_t>(std::floor(o.north / cell_))};
  }

  static std::int64_t pack(std::int64_t x, std::int64_t y) { return (x << 32) ^ (y & 0xffffffff); }

  std::int64_t key(const GeoPoint& p) const {
    const auto [x, y] = cell_of(p);
    return pack(x, y);
  }

  LocalFrame frame_;
  double cell_ = 1.0;
  bool brute_ = true;
  std::size_t n_ = 0;
  std::unordered_map<std::int64_t, std::vector<std::uint32_t>> cells_;
};

}  // namespace poitrav
