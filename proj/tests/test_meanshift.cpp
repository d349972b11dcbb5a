#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "poitrav/meanshift.hpp"
#include "poitrav/rng.hpp"

using namespace poitrav;

namespace {

std::vector<GeoPoint> blob(Rng& rng, GeoPoint c, double sigma, int n) {
  std::vector<GeoPoint> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(displace(c, {sigma * standard_normal(rng), sigma * standard_normal(rng)}));
  }
  return out;
}

GeoPoint mean_of(const std::vector<GeoPoint>& pts) {
  double lng = 0, lat = 0;
  for (const auto& p : pts) {
    lng += p.lng;
    lat += p.lat;
  }
  return {lng / static_cast<double>(pts.size()), lat / static_cast<double>(pts.size())};
}

double nearest(const GeoPoint& x, const std::vector<GeoPoint>& seeds) {
  double best = 1e300;
  for (const auto& s : seeds) best = std::min(best, haversine_m(x, s));
  return best;
}

}  // namespace

TEST(MeanShiftVector, ZeroAtCentroidOfSymmetricSquare) {
  const GeoPoint c{109.5, 36.6};
  const LocalFrame f(c);
  const std::vector<GeoPoint> sq = {f.to_geo({100, 100}), f.to_geo({-100, 100}), f.to_geo({100, -100}),
                                    f.to_geo({-100, -100})};
  const auto v = mean_shift_vector(c, sq, MeanShiftConfig{});
  ASSERT_TRUE(v);
  EXPECT_LT(v->norm(), 1e-9);
}

TEST(MeanShiftVector, ZeroForSinglePointAtX) {
  const GeoPoint x{109.5, 36.6};
  const auto v = mean_shift_vector(x, std::vector<GeoPoint>{x}, MeanShiftConfig{});
  ASSERT_TRUE(v);
  EXPECT_LT(v->norm(), 1e-9);
}

TEST(MeanShiftVector, OnePointHundredMetresEast) {
  const GeoPoint x{0, 0};
  const std::vector<GeoPoint> pts = {LocalFrame(x).to_geo({100, 0})};
  const auto v = mean_shift_vector(x, pts, MeanShiftConfig{});
  ASSERT_TRUE(v);
  EXPECT_NEAR(v->east, 100.0, 1e-6);
  EXPECT_NEAR(v->north, 0.0, 1e-6);
}

TEST(MeanShiftVector, IsolatedPointUnderFlatKernel) {
  const GeoPoint x{109.5, 36.6};
  const std::vector<GeoPoint> far = {displace(x, {5000, 0})};
  EXPECT_FALSE(mean_shift_vector(x, far, MeanShiftConfig{}));
  MeanShiftConfig g;
  g.kernel = Kernel::gaussian;
  EXPECT_TRUE(mean_shift_vector(x, far, g));
}

TEST(MeanShiftConfig, Validation) {
  MeanShiftConfig c;
  c.bandwidth_h = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.epsilon = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.max_iter = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.merge_radius = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(MeanShiftCluster, IdenticalPointsGiveOneSeed) {
  const std::vector<GeoPoint> pts(50, GeoPoint{109.5, 36.6});
  const auto s = mean_shift_cluster(pts, MeanShiftConfig{}, PoiLabel::food);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.member_count[0], 50u);
  EXPECT_EQ(s.seeds[0], pts[0]);
  EXPECT_EQ(s.source_label, PoiLabel::food);
}

TEST(MeanShiftCluster, TwoBlobsRecoverMeans) {
  Rng rng(17);
  const GeoPoint c0{109.5, 36.6};
  const auto a = blob(rng, c0, 50, 60);
  const auto b = blob(rng, displace(c0, {5000, 0}), 50, 60);
  std::vector<GeoPoint> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  const auto s = mean_shift_cluster(pts, MeanShiftConfig{});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_LT(nearest(mean_of(a), s.seeds), 25.0);
  EXPECT_LT(nearest(mean_of(b), s.seeds), 25.0);
}

TEST(MeanShiftCluster, FiveBlobsGiveFiveSeeds) {
  Rng rng(5);
  const GeoPoint c0{109.5, 36.6};
  std::vector<GeoPoint> pts;
  std::vector<GeoPoint> means;
  for (int i = 0; i < 5; ++i) {
    const auto b = blob(rng, displace(c0, {6000.0 * i, 3000.0 * (i % 2)}), 50, 40);
    means.push_back(mean_of(b));
    pts.insert(pts.end(), b.begin(), b.end());
  }
  for (auto kernel : {Kernel::flat, Kernel::gaussian}) {
    MeanShiftConfig cfg;
    cfg.kernel = kernel;
    const auto s = mean_shift_cluster(pts, cfg);
    ASSERT_EQ(s.size(), 5u);
    for (const auto& m : means) EXPECT_LT(nearest(m, s.seeds), 25.0);
  }
}

TEST(MeanShiftCluster, InvariantsAndFixedPoint) {
  Rng rng(23);
  const GeoPoint c0{109.5, 36.6};
  std::vector<GeoPoint> pts;
  for (int i = 0; i < 4; ++i) {
    const auto b = blob(rng, displace(c0, {1500.0 * i, 0}), 150, 50);
    pts.insert(pts.end(), b.begin(), b.end());
  }
  for (int i = 0; i < 10; ++i) pts.push_back(displace(c0, {-20000.0 - 3000 * i, 9000}));  // isolated
  const MeanShiftConfig cfg;
  const auto s = mean_shift_cluster(pts, cfg);
  ASSERT_EQ(s.seeds.size(), s.member_count.size());
  EXPECT_EQ(std::accumulate(s.member_count.begin(), s.member_count.end(), std::size_t{0}), pts.size());
  ASSERT_EQ(s.assignment.size(), pts.size());
  std::vector<std::size_t> counted(s.size(), 0);
  for (auto a : s.assignment) {
    ASSERT_LT(a, s.size());
    ++counted[a];
  }
  EXPECT_EQ(counted, s.member_count);
  for (const auto& seed : s.seeds) {
    const auto v = mean_shift_vector(seed, pts, cfg);
    if (v) EXPECT_LT(v->norm(), cfg.epsilon);
  }
}

TEST(MeanShiftCluster, DeterministicAndPermutationStable) {
  Rng rng(31);
  const GeoPoint c0{109.5, 36.6};
  std::vector<GeoPoint> pts;
  for (int i = 0; i < 3; ++i) {
    const auto b = blob(rng, displace(c0, {0, 4000.0 * i}), 80, 70);
    pts.insert(pts.end(), b.begin(), b.end());
  }
  const MeanShiftConfig cfg;
  const auto s1 = mean_shift_cluster(pts, cfg);
  const auto s2 = mean_shift_cluster(pts, cfg);
  EXPECT_EQ(s1.seeds, s2.seeds);
  EXPECT_EQ(s1.member_count, s2.member_count);

  std::mt19937_64 shuf(2);
  for (int t = 0; t < 5; ++t) {
    auto perm = pts;
    std::shuffle(perm.begin(), perm.end(), shuf);
    const auto sp = mean_shift_cluster(perm, cfg);
    ASSERT_EQ(sp.size(), s1.size());
    for (const auto& seed : s1.seeds) EXPECT_LE(nearest(seed, sp.seeds), cfg.merge_radius);
  }
}

TEST(MeanShiftCluster, EmptyInputRejected) {
  EXPECT_THROW(mean_shift_cluster(std::vector<GeoPoint>{}, MeanShiftConfig{}), InputError);
}

TEST(SeedsCsv, RoundTrip) {
  Rng rng(1);
  const auto pts = blob(rng, {109.5, 36.6}, 60, 30);
  std::vector<SeedSet> sets = {mean_shift_cluster(pts, MeanShiftConfig{}, PoiLabel::hotel),
                               mean_shift_cluster(pts, MeanShiftConfig{}, PoiLabel::car)};
  const auto text = seeds_to_csv(sets);
  EXPECT_EQ(text.substr(0, text.find('\n')), "label,lng,lat,member_count");
  const auto back = seeds_from_csv(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].seeds, sets[0].seeds);
  EXPECT_EQ(back[1].member_count, sets[1].member_count);
  EXPECT_EQ(back[1].source_label, PoiLabel::car);
}
