#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "poitrav/geo.hpp"
#include "poitrav/labels.hpp"
#include "poitrav/spatial_grid.hpp"

using namespace poitrav;

namespace {

GeoPoint random_point(std::mt19937_64& rng, double lng0 = -180, double lng1 = 180, double lat0 = -89,
                      double lat1 = 89) {
  std::uniform_real_distribution<double> lng(lng0, lng1), lat(lat0, lat1);
  return {lng(rng), lat(rng)};
}

}  // namespace

TEST(Haversine, IdentityIsZero) {
  EXPECT_EQ(haversine_m({109.5, 36.6}, {109.5, 36.6}), 0.0);
}

TEST(Haversine, OneDegreeOfLatitudeAtEquator) {
  // R * pi / 180 with R = 6,371,000 m.
  EXPECT_NEAR(haversine_m({0, 0}, {0, 1}), 111194.93, 1.0);
}

TEST(Haversine, SymmetricBitIdentical) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_point(rng), b = random_point(rng);
    EXPECT_EQ(haversine_m(a, b), haversine_m(b, a));
  }
}

TEST(Haversine, PositiveForDistinctPoints) {
  EXPECT_GT(haversine_m({109.5, 36.6}, {109.5, 36.600001}), 0.0);
  EXPECT_GT(haversine_m({109.5, 36.6}, {109.500001, 36.6}), 0.0);
}

TEST(Haversine, TriangleInequality) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_point(rng), b = random_point(rng), c = random_point(rng);
    const double ab = haversine_m(a, b), bc = haversine_m(b, c), ac = haversine_m(a, c);
    EXPECT_LE(ac, (ab + bc) * (1 + 1e-6) + 1e-6);
  }
}

TEST(Haversine, MatchesChordOracle) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_point(rng), b = random_point(rng);
    const double d = haversine_m(a, b);
    EXPECT_NEAR(d, oracle::chord_distance(a, b), 1e-6 * std::max(1.0, d));
  }
}

TEST(Haversine, RejectsInvalidCoordinates) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_THROW(haversine_m({nan, 0}, {0, 0}), InputError);
  EXPECT_THROW(haversine_m({0, 0}, {0, inf}), InputError);
  EXPECT_THROW(haversine_m({181, 0}, {0, 0}), InputError);
  EXPECT_THROW(haversine_m({0, -90.5}, {0, 0}), InputError);
  EXPECT_NO_THROW(haversine_m({180, 90}, {-180, -90}));
}

TEST(LocalFrame, RoundTripAndScale) {
  const LocalFrame f({109.5, 36.6});
  const GeoPoint p{109.51, 36.59};
  const auto o = f.to_local(p);
  const auto back = f.to_geo(o);
  EXPECT_NEAR(back.lng, p.lng, 1e-12);
  EXPECT_NEAR(back.lat, p.lat, 1e-12);
  // Tangent distance agrees with haversine to well under a percent at city scale.
  EXPECT_NEAR(o.norm(), haversine_m(f.origin(), p), 1e-3 * haversine_m(f.origin(), p));
}

TEST(LocalFrame, DisplaceMovesByOffset) {
  const GeoPoint p{109.5, 36.6};
  EXPECT_NEAR(haversine_m(p, displace(p, {100, 0})), 100.0, 1e-3);
  EXPECT_NEAR(haversine_m(p, displace(p, {0, -250})), 250.0, 1e-3);
}

TEST(Labels, SeventeenInRecordOrder) {
  ASSERT_EQ(kAllLabels.size(), 17u);
  EXPECT_EQ(label_name(PoiLabel::food), "food");
  EXPECT_EQ(label_name(PoiLabel::government), "government");
  for (std::size_t i = 0; i < kAllLabels.size(); ++i) EXPECT_EQ(index_of(kAllLabels[i]), i);
}

TEST(Labels, ParsesRecordAndCategoryNames) {
  EXPECT_EQ(parse_label("food").label, PoiLabel::food);
  EXPECT_EQ(parse_label("  Delicious   Food ").label, PoiLabel::food);
  EXPECT_EQ(parse_label("MEDICINE").status, LabelParse::ok);
  EXPECT_EQ(parse_label("Natural Features").status, LabelParse::excluded);
  EXPECT_EQ(parse_label("spaceport").status, LabelParse::unknown);
  for (auto l : kAllLabels) {
    EXPECT_EQ(label_from_name(label_name(l)), l);
    EXPECT_EQ(parse_label(kCategoryNames[index_of(l)]).label, l);
  }
}

TEST(SpatialGrid, CandidatesCoverEveryPointWithinRadius) {
  std::mt19937_64 rng(5);
  std::vector<GeoPoint> pts;
  for (int i = 0; i < 2000; ++i) pts.push_back(random_point(rng, 109.4, 109.6, 36.5, 36.7));
  const double radius = 400;
  const SpatialGrid grid(pts, radius);
  std::vector<std::uint32_t> cand;
  for (int q = 0; q < 200; ++q) {
    const auto x = random_point(rng, 109.4, 109.6, 36.5, 36.7);
    grid.candidates(x, cand);
    EXPECT_TRUE(std::is_sorted(cand.begin(), cand.end()));
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
      if (haversine_m(x, pts[i]) < radius) {
        EXPECT_TRUE(std::binary_search(cand.begin(), cand.end(), i));
      }
    }
  }
}
