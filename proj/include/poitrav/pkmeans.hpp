#pragma once

// Lloyd's K-means on geographic points with haversine assignment, started
// either from Mean-Shift POI seeds (P-KMEANS) or from random input points.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "poitrav/csv.hpp"
#include "poitrav/error.hpp"
#include "poitrav/geo.hpp"
#include "poitrav/meanshift.hpp"
#include "poitrav/rng.hpp"

namespace poitrav {

struct ClusterModel {
  std::size_t k = 0;
  std::vector<GeoPoint> centers;
  std::vector<std::size_t> assignments;
  double inertia = 0.0;  // sum of squared haversine meters
  std::size_t n_iterations = 0;
  /// Inertia after every assignment pass, first entry from the initial centers.
  std::vector<double> inertia_history;

  std::vector<std::size_t> cluster_sizes() const {
    std::vector<std::size_t> n(k, 0);
    for (auto a : assignments) ++n[a];
    return n;
  }
};

struct LifeCircle {
  GeoPoint center;
  double radius_m = 500.0;
  std::size_t n_k = 0;
};

namespace detail {

struct CosPoint {
  GeoPoint p;
  double cos_lat;
};

inline CosPoint with_cos(const GeoPoint& p) { return {p, std::cos(p.lat * kDegToRad)}; }

// Same arithmetic as haversine_unchecked with the cosines hoisted.
inline double haversine_cached(const CosPoint& a, const CosPoint& b) {
  const double s_lat = std::sin((b.p.lat - a.p.lat) * kDegToRad * 0.5);
  const double s_lng = std::sin((b.p.lng - a.p.lng) * kDegToRad * 0.5);
  double h = s_lat * s_lat + a.cos_lat * b.cos_lat * s_lng * s_lng;
  if (h > 1.0) h = 1.0;
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

class Lloyd {
 public:
  Lloyd(std::span<const GeoPoint> points, std::vector<GeoPoint> centers)
      : n_(points.size()), k_(centers.size()) {
    pts_.reserve(n_);
    for (const auto& p : points) pts_.push_back(with_cos(p));
    ctr_.reserve(k_);
    for (const auto& c : centers) ctr_.push_back(with_cos(c));
    assign_.assign(n_, std::numeric_limits<std::size_t>::max());
    dist_.assign(n_, 0.0);
  }

  ClusterModel run(double epsilon, std::size_t max_iter) {
    ClusterModel m;
    m.k = k_;
    assign_step();
    m.inertia_history.push_back(inertia_);
    std::size_t iter = 0;
    while (iter < max_iter) {
      const double shift = update_step();
      const bool changed = assign_step();
      m.inertia_history.push_back(inertia_);
      ++iter;
      if (!changed || shift < epsilon) break;
    }
    m.n_iterations = iter;
    m.inertia = inertia_;
    m.assignments = assign_;
    m.centers.reserve(k_);
    for (const auto& c : ctr_) m.centers.push_back(c.p);
    return m;
  }

 private:
  // Nearest center per point, ties to the lowest index. Returns whether any
  // assignment changed.
  bool assign_step() {
    bool changed = false;
    inertia_ = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      std::size_t best = 0;
      double best_d = haversine_cached(pts_[i], ctr_[0]);
      for (std::size_t c = 1; c < k_; ++c) {
        const double d = haversine_cached(pts_[i], ctr_[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign_[i] != best) changed = true;
      assign_[i] = best;
      dist_[i] = best_d;
      inertia_ += best_d * best_d;
    }
    return changed;
  }

  // Centroid = arithmetic mean of member coordinates. Empty clusters are
  // re-seeded at the point farthest from its current center. Returns the
  // largest center displacement in meters.
  double update_step() {
    std::vector<double> slng(k_, 0.0), slat(k_, 0.0);
    std::vector<std::size_t> cnt(k_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      slng[assign_[i]] += pts_[i].p.lng;
      slat[assign_[i]] += pts_[i].p.lat;
      ++cnt[assign_[i]];
    }
    double shift = 0.0;
    std::vector<CosPoint> next(ctr_);
    for (std::size_t c = 0; c < k_; ++c) {
      if (cnt[c] == 0) continue;
      const double n = static_cast<double>(cnt[c]);
      next[c] = with_cos({slng[c] / n, slat[c] / n});
    }
    std::vector<double> far(dist_);
    for (std::size_t c = 0; c < k_; ++c) {
      if (cnt[c] != 0) continue;
      std::size_t pick = n_;
      double best = -1.0;
      for (std::size_t i = 0; i < n_; ++i) {
        if (cnt[assign_[i]] > 1 && far[i] > best) {
          best = far[i];
          pick = i;
        }
      }
      if (pick == n_) throw NumericalError("k-means: cannot re-seed empty cluster");
      --cnt[assign_[pick]];
      cnt[c] = 1;
      far[pick] = -1.0;
      next[c] = pts_[pick];
    }
    for (std::size_t c = 0; c < k_; ++c) {
      shift = std::max(shift, haversine_cached(ctr_[c], next[c]));
    }
    ctr_ = std::move(next);
    return shift;
  }

  std::size_t n_, k_;
  std::vector<CosPoint> pts_, ctr_;
  std::vector<std::size_t> assign_;
  std::vector<double> dist_;
  double inertia_ = 0.0;
};

inline void check_points(std::span<const GeoPoint> points, std::size_t k) {
  if (k == 0) throw InputError("k-means needs k >= 1");
  if (points.size() < k) {
    throw InputError(fmt::format("k-means: {} centers for {} points", k, points.size()));
  }
  for (const auto& p : points) require_valid(p);
}

}  // namespace detail

/// Seeded K-means: K = number of seeds, initial centers = the seeds.
/// Stops when no assignment changes, when every center moved less than
/// `epsilon` meters, or after `max_iter` update passes.
inline ClusterModel p_kmeans(std::span<const GeoPoint> points, std::span<const GeoPoint> seeds,
                             double epsilon = 0.01, std::size_t max_iter = 300) {
  detail::check_points(points, seeds.size());
  for (const auto& s : seeds) require_valid(s);
  return detail::Lloyd(points, {seeds.begin(), seeds.end()}).run(epsilon, max_iter);
}

inline ClusterModel p_kmeans(std::span<const GeoPoint> points, const SeedSet& seeds,
                             double epsilon = 0.01, std::size_t max_iter = 300) {
  return p_kmeans(points, std::span<const GeoPoint>(seeds.seeds), epsilon, max_iter);
}

/// Plain K-means baseline: k distinct input points drawn uniformly at random
/// (deterministic under rng_seed) as initial centers.
inline ClusterModel unseeded_kmeans(std::span<const GeoPoint> points, std::size_t k,
                                    std::uint64_t rng_seed, double epsilon = 0.01,
                                    std::size_t max_iter = 300) {
  detail::check_points(points, k);
  Rng rng(rng_seed);
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<GeoPoint> centers;
  centers.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, idx.size() - i));
    std::swap(idx[i], idx[j]);
    centers.push_back(points[idx[i]]);
  }
  return detail::Lloyd(points, std::move(centers)).run(epsilon, max_iter);
}

/// Initial centers for a seeded K sweep. The seeds are ranked by member
/// count (stable); K <= |seeds| takes the top K, larger K appends input
/// points by farthest-first traversal from the centers chosen so far.
inline std::vector<GeoPoint> sweep_initial_centers(std::span<const GeoPoint> points,
                                                   const SeedSet& seeds, std::size_t k) {
  detail::check_points(points, k);
  std::vector<std::size_t> order(seeds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return seeds.member_count[a] > seeds.member_count[b];
  });
  std::vector<GeoPoint> centers;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
    centers.push_back(seeds.seeds[order[i]]);
  }
  if (centers.size() == k) return centers;

  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  auto absorb = [&](const GeoPoint& c) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest[i] = std::min(nearest[i], detail::haversine_unchecked(points[i], c));
    }
  };
  for (const auto& c : centers) absorb(c);
  while (centers.size() < k) {
    std::size_t pick = 0;
    if (centers.empty()) {
      pick = 0;
    } else {
      for (std::size_t i = 1; i < points.size(); ++i) {
        if (nearest[i] > nearest[pick]) pick = i;
      }
    }
    centers.push_back(points[pick]);
    absorb(points[pick]);
  }
  return centers;
}

/// One circle per non-empty cluster, centered on the cluster centroid.
inline std::vector<LifeCircle> life_circles(const ClusterModel& model, double radius_m = 500.0) {
  if (!(radius_m > 0.0)) throw ConfigError("life circle radius must be > 0");
  const auto sizes = model.cluster_sizes();
  std::vector<LifeCircle> out;
  for (std::size_t c = 0; c < model.k; ++c) {
    if (sizes[c] == 0) continue;
    out.push_back({model.centers[c], radius_m, sizes[c]});
  }
  return out;
}

inline std::string centers_to_csv(const ClusterModel& model) {
  csv::Writer w;
  w.row({"k", "lng", "lat", "n_k"});
  const auto sizes = model.cluster_sizes();
  for (std::size_t c = 0; c < model.k; ++c) {
    w.row({fmt::format("{}", c), fmt::format("{}", model.centers[c].lng),
           fmt::format("{}", model.centers[c].lat), fmt::format("{}", sizes[c])});
  }
  return w.str();
}

inline std::string assignments_to_csv(const ClusterModel& model) {
  std::string out = "point_index,cluster\n";
  for (std::size_t i = 0; i < model.assignments.size(); ++i) {
    out += fmt::format("{},{}\n", i, model.assignments[i]);
  }
  return out;
}

}  // namespace poitrav
