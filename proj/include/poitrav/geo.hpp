#pragma once

#include <cmath>
#include <numbers>

#include "poitrav/error.hpp"

namespace poitrav {

inline constexpr double kEarthRadiusM = 6371000.0;
inline constexpr double kDegToRad = std::numbers::pi / 180.0;

/// A WGS84-ish coordinate on a spherical earth. Degrees.
struct GeoPoint {
  double lng = 0.0;
  double lat = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.lng) && std::isfinite(p.lat) && p.lng >= -180.0 &&
         p.lng <= 180.0 && p.lat >= -90.0 && p.lat <= 90.0;
}

inline void require_valid(const GeoPoint& p) {
  if (!is_valid(p)) throw InputError("invalid coordinate");
}

namespace detail {

// Haversine core on pre-validated points. The sum is formed from terms that
// are symmetric in (a, b), so swapping the arguments is bit-identical.
inline double haversine_unchecked(const GeoPoint& a, const GeoPoint& b) {
  const double s_lat = std::sin((b.lat - a.lat) * kDegToRad * 0.5);
  const double s_lng = std::sin((b.lng - a.lng) * kDegToRad * 0.5);
  const double c = std::cos(a.lat * kDegToRad) * std::cos(b.lat * kDegToRad);
  double h = s_lat * s_lat + c * s_lng * s_lng;
  if (h > 1.0) h = 1.0;
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

}  // namespace detail

/// Great-circle distance in meters (sphere of radius 6,371,000 m).
inline double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  require_valid(a);
  require_valid(b);
  return detail::haversine_unchecked(a, b);
}

/// Displacement in a local tangent plane, meters east/north.
struct Offset {
  double east = 0.0;
  double north = 0.0;

  double norm() const { return std::hypot(east, north); }
};

/// Equirectangular tangent frame anchored at an origin. Good to well under
/// a percent over city-sized extents.
class LocalFrame {
 public:
  explicit LocalFrame(const GeoPoint& origin)
      : origin_(origin), cos_lat_(std::cos(origin.lat * kDegToRad)) {}

  const GeoPoint& origin() const { return origin_; }

  Offset to_local(const GeoPoint& p) const {
    return {(p.lng - origin_.lng) * kDegToRad * kEarthRadiusM * cos_lat_,
            (p.lat - origin_.lat) * kDegToRad * kEarthRadiusM};
  }

  GeoPoint to_geo(const Offset& o) const {
    return {origin_.lng + o.east / (kDegToRad * kEarthRadiusM * cos_lat_),
            origin_.lat + o.north / (kDegToRad * kEarthRadiusM)};
  }

 private:
  GeoPoint origin_;
  double cos_lat_;
};

/// Moves `p` by a tangent-plane offset taken at p's own latitude.
inline GeoPoint displace(const GeoPoint& p, const Offset& o) {
  return LocalFrame(p).to_geo(o);
}

}  // namespace poitrav
