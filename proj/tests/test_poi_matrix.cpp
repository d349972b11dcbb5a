#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "poitrav/poi_matrix.hpp"
#include "poitrav/rng.hpp"

using namespace poitrav;

namespace {

const GeoPoint kC{109.49, 36.60};

PoiRecord poi_north(double m, PoiLabel l) { return {LocalFrame(kC).to_geo({0, m}), "p", l, "", "", ""}; }

std::int64_t row_sum(const std::array<std::int64_t, kNumLabels>& r) {
  return std::accumulate(r.begin(), r.end(), std::int64_t{0});
}

}  // namespace

TEST(LabelMass, PoiAtCenterWeighsOne) {
  const std::vector<PoiRecord> pois = {poi_north(0, PoiLabel::food)};
  const auto m = cluster_label_mass({kC, 500, 1}, pois);
  EXPECT_EQ(m[index_of(PoiLabel::food)], 1.0);
}

TEST(LabelMass, PoiAtRadiusExcluded) {
  const std::vector<PoiRecord> pois = {poi_north(500, PoiLabel::food)};
  // Radius set to the exact computed distance, so dis == DIS.
  const double dis = haversine_m(kC, pois[0].location);
  EXPECT_EQ(cluster_label_mass({kC, dis, 1}, pois)[index_of(PoiLabel::food)], 0.0);
  EXPECT_GT(cluster_label_mass({kC, std::nextafter(dis, 1e9), 1}, pois)[index_of(PoiLabel::food)], 0.0);
}

TEST(LabelMass, TwoHotels) {
  const std::vector<PoiRecord> pois = {poi_north(125, PoiLabel::hotel), poi_north(-250, PoiLabel::hotel)};
  EXPECT_NEAR(cluster_label_mass({kC, 500, 1}, pois)[index_of(PoiLabel::hotel)], 1.25, 1e-12);
}

TEST(LabelMass, MonotoneDistanceDecay) {
  double prev = -1;
  for (double d = 490; d >= 0; d -= 10) {
    const std::vector<PoiRecord> pois = {poi_north(d, PoiLabel::sports)};
    const double m = cluster_label_mass({kC, 500, 1}, pois)[index_of(PoiLabel::sports)];
    EXPECT_GE(m, prev);
    prev = m;
  }
}

TEST(LabelMass, IndexMatchesBruteForceExactly) {
  Rng rng(4);
  std::vector<PoiRecord> pois;
  for (int i = 0; i < 3000; ++i) {
    pois.push_back({displace(kC, {8000 * (uniform01(rng) - 0.5), 8000 * (uniform01(rng) - 0.5)}), "p",
                    kAllLabels[i % kNumLabels], "", "", ""});
  }
  const PoiIndex index(pois, 500);
  for (int q = 0; q < 300; ++q) {
    const LifeCircle c{displace(kC, {9000 * (uniform01(rng) - 0.5), 9000 * (uniform01(rng) - 0.5)}), 500, 3};
    EXPECT_EQ(index.mass(c), cluster_label_mass(c, pois));
  }
}

TEST(Normalize, Examples) {
  LabelMassVector m{};
  m[index_of(PoiLabel::food)] = 1;
  m[index_of(PoiLabel::shopping)] = 1;
  auto n = normalize_cluster(m);
  ASSERT_TRUE(n);
  EXPECT_EQ((*n)[index_of(PoiLabel::food)], 0.5);
  EXPECT_EQ((*n)[index_of(PoiLabel::shopping)], 0.5);

  LabelMassVector single{};
  single[index_of(PoiLabel::car)] = 0.3;
  EXPECT_EQ((*normalize_cluster(single))[index_of(PoiLabel::car)], 1.0);

  const auto f = fixture::two_circle();
  n = normalize_cluster(f.mass1);
  ASSERT_TRUE(n);
  for (std::size_t t = 0; t < kNumLabels; ++t) EXPECT_NEAR((*n)[t], f.norm1[t], 1e-12);
  EXPECT_NEAR(std::accumulate(n->begin(), n->end(), 0.0), 1.0, 1e-12);

  EXPECT_FALSE(normalize_cluster(LabelMassVector{}));
}

TEST(Pattern, SingleCircleSingleLabel) {
  LabelMassVector m{};
  m[index_of(PoiLabel::food)] = 1.0;
  const std::vector<std::pair<LifeCircle, std::optional<LabelMassVector>>> in = {{{kC, 500, 1}, m}};
  const auto row = passenger_pattern(in, 1000);
  ASSERT_TRUE(row);
  EXPECT_EQ(row->counts[index_of(PoiLabel::food)], 1000);
  EXPECT_EQ(row_sum(row->counts), 1000);
}

TEST(Pattern, SqrtWeighting) {
  LabelMassVector m{};
  m[index_of(PoiLabel::food)] = 1.0;
  const std::vector<std::pair<LifeCircle, std::optional<LabelMassVector>>> one = {{{kC, 500, 1}, m}};
  const std::vector<std::pair<LifeCircle, std::optional<LabelMassVector>>> four = {{{kC, 500, 4}, m}};
  EXPECT_EQ(passenger_pattern(four)->raw[0], 2.0 * passenger_pattern(one)->raw[0]);
}

TEST(Pattern, TwoCircleFixture) {
  const auto f = fixture::two_circle();
  const auto m1 = cluster_label_mass(f.circles[0], f.pois);
  const auto m2 = cluster_label_mass(f.circles[1], f.pois);
  for (std::size_t t = 0; t < kNumLabels; ++t) {
    EXPECT_NEAR(m1[t], f.mass1[t], 1e-12) << t;
    EXPECT_NEAR(m2[t], f.mass2[t], 1e-12) << t;
  }
  const std::vector<std::pair<LifeCircle, std::optional<LabelMassVector>>> in = {
      {f.circles[0], normalize_cluster(m1)}, {f.circles[1], normalize_cluster(m2)}};
  const auto row = passenger_pattern(in, 1000);
  ASSERT_TRUE(row);
  for (std::size_t t = 0; t < kNumLabels; ++t) EXPECT_NEAR(row->raw[t], f.raw[t], 1e-12);
  EXPECT_EQ(row->counts, f.rounded);
  EXPECT_EQ(row_sum(row->counts), 1000);
}

TEST(Pattern, DroppingEmptyCircleIsBitIdentical) {
  const auto f = fixture::two_circle();
  std::vector<std::pair<LifeCircle, std::optional<LabelMassVector>>> in = {
      {f.circles[0], f.norm1}, {f.circles[1], f.norm2}};
  const auto base = passenger_pattern(in);
  in.insert(in.begin() + 1, {{kC, 500, 9}, std::nullopt});
  const auto with_empty = passenger_pattern(in);
  EXPECT_EQ(base->raw, with_empty->raw);
  EXPECT_EQ(base->counts, with_empty->counts);
}

TEST(Pattern, AllEmptyDropsPassenger) {
  const std::vector<std::pair<LifeCircle, std::optional<LabelMassVector>>> in = {{{kC, 500, 3}, std::nullopt}};
  EXPECT_FALSE(passenger_pattern(in));
}

TEST(Pattern, RowsSumToLAndScaleInvariant) {
  Rng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    LabelMassVector raw{};
    for (auto& v : raw) v = uniform01(rng) < 0.4 ? 0.0 : uniform01(rng) * 10;
    if (std::accumulate(raw.begin(), raw.end(), 0.0) == 0) raw[0] = 1;
    const std::int64_t L = 1 + static_cast<std::int64_t>(uniform_index(rng, 2000));
    const auto counts = round_to_total(raw, L);
    EXPECT_EQ(row_sum(counts), L);
    for (std::size_t t = 0; t < kNumLabels; ++t) {
      EXPECT_GE(counts[t], 0);
      if (raw[t] == 0) EXPECT_EQ(counts[t], 0);
    }
    LabelMassVector scaled = raw;
    for (auto& v : scaled) v *= 4.0;  // power of two: exact scaling
    EXPECT_EQ(round_to_total(scaled, L), counts);
  }
}

TEST(MatrixCsv, RoundTripAndValidation) {
  TravelPatternMatrix m;
  m.row_total = 1000;
  m.passengers = {"a", "b"};
  const auto f = fixture::two_circle();
  m.counts = {f.rounded, f.rounded};
  const auto text = matrix_to_csv(m);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "uid,food,hotel,shopping,service,beauty,travel,entertainment,sports,education,media,"
            "medicine,car,traffic,finance,estate,company,government");
  const auto back = matrix_from_csv(text);
  EXPECT_EQ(back.passengers, m.passengers);
  EXPECT_EQ(back.counts, m.counts);
  EXPECT_EQ(back.row_total, 1000);
  EXPECT_THROW(matrix_from_csv("uid,food\na,1\n"), InputError);
}
