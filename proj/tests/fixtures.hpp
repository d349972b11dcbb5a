#pragma once

// Shared hand-computed fixtures.

#include <array>
#include <utility>
#include <vector>

#include "poitrav/poi_matrix.hpp"

namespace fixture {

using namespace poitrav;

// Two life circles, DIS = 500 m, on the equator. Every POI sits due north or
// south of its circle center, and latitudes near zero are represented finely
// enough that the computed distances match the nominal ones to ~1e-13 m.
//
// Circle 1 (N = 1): food at 0 m and 375 m   -> 1 + 0.25 = 1.25
//                   hotel at 125 m          -> 0.75
//                   two medicine at 0 m     -> 2.0
//   normalized: food 0.3125, hotel 0.1875, medicine 0.5
// Circle 2 (N = 4), 10 km north: hotels at 125 m and 250 m -> 1.25
//   normalized: hotel 1.0, weighted by sqrt(4) = 2
// Raw row: food 0.3125, hotel 2.1875, medicine 0.5 (sum 3)
// x 1000/3: 104.1667, 729.1667, 166.6667 -> floors 999, the largest
// remainder (medicine) takes the last unit: 104, 729, 167.
struct TwoCircle {
  std::vector<PoiRecord> pois;
  std::vector<LifeCircle> circles;
  LabelMassVector mass1{}, mass2{}, norm1{}, norm2{}, raw{};
  std::array<std::int64_t, kNumLabels> rounded{};
};

inline TwoCircle two_circle() {
  TwoCircle f;
  const GeoPoint c1{109.49, 0.0};
  const GeoPoint c2 = LocalFrame(c1).to_geo({0, 10000});
  auto at = [](const GeoPoint& c, double north) { return LocalFrame(c).to_geo({0, north}); };
  auto poi = [](GeoPoint p, const char* name, PoiLabel l) { return PoiRecord{p, name, l, "", "", ""}; };
  f.pois = {poi(at(c1, 0), "f1", PoiLabel::food),      poi(at(c1, 375), "f2", PoiLabel::food),
            poi(at(c1, -125), "h1", PoiLabel::hotel),  poi(at(c1, 0), "m1", PoiLabel::medicine),
            poi(at(c1, 0), "m2", PoiLabel::medicine),  poi(at(c2, 125), "h2", PoiLabel::hotel),
            poi(at(c2, -250), "h3", PoiLabel::hotel),  poi(at(c1, 510), "outside", PoiLabel::car),
            poi(at(c1, 5000), "far", PoiLabel::sports)};
  f.circles = {{c1, 500.0, 1}, {c2, 500.0, 4}};
  const auto food = index_of(PoiLabel::food), hotel = index_of(PoiLabel::hotel),
             med = index_of(PoiLabel::medicine);
  f.mass1[food] = 1.25;
  f.mass1[hotel] = 0.75;
  f.mass1[med] = 2.0;
  f.mass2[hotel] = 1.25;
  f.norm1[food] = 0.3125;
  f.norm1[hotel] = 0.1875;
  f.norm1[med] = 0.5;
  f.norm2[hotel] = 1.0;
  f.raw[food] = 0.3125;
  f.raw[hotel] = 2.1875;
  f.raw[med] = 0.5;
  f.rounded[food] = 104;
  f.rounded[hotel] = 729;
  f.rounded[med] = 167;
  return f;
}

}  // namespace fixture
