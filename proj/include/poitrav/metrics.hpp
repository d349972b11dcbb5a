#pragma once

// Cluster validity indices and held-out prediction scores.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "poitrav/error.hpp"
#include "poitrav/geo.hpp"

namespace poitrav {

struct ClusterEvalReport {
  std::size_t k = 0;
  double silhouette = 0.0;
  double calinski_harabasz = 0.0;
  double davies_bouldin = 0.0;
};

struct PredictionReport {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
};

/// Packed symmetric matrix of pairwise haversine distances.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(std::span<const GeoPoint> points) : n_(points.size()) {
    d_.resize(n_ * (n_ - (n_ ? 1 : 0)) / 2);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        d_[offset(i, j)] = detail::haversine_unchecked(points[i], points[j]);
      }
    }
  }

  std::size_t size() const { return n_; }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    if (i > j) std::swap(i, j);
    return d_[offset(i, j)];
  }

 private:
  std::size_t offset(std::size_t i, std::size_t j) const { return i * (2 * n_ - i - 1) / 2 + (j - i - 1); }

  std::size_t n_;
  std::vector<double> d_;
};

namespace detail {

// Compacts arbitrary cluster ids to 0..k-1 in order of first appearance.
inline std::vector<std::size_t> compact_labels(std::span<const std::size_t> assignments,
                                               std::size_t& k) {
  std::map<std::size_t, std::size_t> ids;
  std::vector<std::size_t> out(assignments.size());
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const auto [it, _] = ids.emplace(assignments[i], ids.size());
    out[i] = it->second;
  }
  k = ids.size();
  return out;
}

template <class Dist>
double silhouette_impl(std::size_t n, std::span<const std::size_t> assignments, Dist&& dist) {
  if (assignments.size() != n) throw InputError("assignments size differs from points");
  std::size_t k = 0;
  const auto lab = compact_labels(assignments, k);
  if (k < 2) throw NumericalError("silhouette undefined for fewer than 2 clusters");
  std::vector<std::size_t> size(k, 0);
  for (auto l : lab) ++size[l];
  std::vector<double> sums(k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (size[lab[i]] == 1) continue;  // singleton scores 0
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sums[lab[j]] += dist(i, j);
    }
    const double a = sums[lab[i]] / static_cast<double>(size[lab[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != lab[i]) b = std::min(b, sums[c] / static_cast<double>(size[c]));
    }
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

struct Projected {
  std::vector<Offset> xy;
  std::vector<std::size_t> lab;
  std::size_t k = 0;
  std::vector<Offset> centroid;
  std::vector<std::size_t> size;
  Offset mean;
};

inline Projected project(std::span<const GeoPoint> points, std::span<const std::size_t> assignments) {
  if (assignments.size() != points.size()) throw InputError("assignments size differs from points");
  if (points.empty()) throw NumericalError("no points");
  Projected p;
  p.lab = compact_labels(assignments, p.k);
  double lng = 0, lat = 0;
  for (const auto& q : points) {
    require_valid(q);
    lng += q.lng;
    lat += q.lat;
  }
  const double n = static_cast<double>(points.size());
  const LocalFrame frame({lng / n, lat / n});
  p.xy.reserve(points.size());
  for (const auto& q : points) p.xy.push_back(frame.to_local(q));
  p.centroid.assign(p.k, {});
  p.size.assign(p.k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    p.centroid[p.lab[i]].east += p.xy[i].east;
    p.centroid[p.lab[i]].north += p.xy[i].north;
    ++p.size[p.lab[i]];
    p.mean.east += p.xy[i].east;
    p.mean.north += p.xy[i].north;
  }
  for (std::size_t c = 0; c < p.k; ++c) {
    p.centroid[c].east /= static_cast<double>(p.size[c]);
    p.centroid[c].north /= static_cast<double>(p.size[c]);
  }
  p.mean.east /= n;
  p.mean.north /= n;
  return p;
}

inline double sq(const Offset& a, const Offset& b) {
  const double de = a.east - b.east, dn = a.north - b.north;
  return de * de + dn * dn;
}

}  // namespace detail

/// Mean silhouette over points using haversine distances. Points in
/// singleton clusters, and points with a = b = 0, score 0.
inline double silhouette(std::span<const GeoPoint> points, std::span<const std::size_t> assignments) {
  for (const auto& p : points) require_valid(p);
  return detail::silhouette_impl(points.size(), assignments, [&](std::size_t i, std::size_t j) {
    return detail::haversine_unchecked(points[i], points[j]);
  });
}

inline double silhouette(const DistanceMatrix& dist, std::span<const std::size_t> assignments) {
  return detail::silhouette_impl(dist.size(), assignments,
                                 [&](std::size_t i, std::size_t j) { return dist(i, j); });
}

/// [B / (k - 1)] / [W / (n - k)] with between/within sums of squares in a
/// tangent plane centered on the data. +inf when W = 0.
inline double calinski_harabasz(std::span<const GeoPoint> points,
                                std::span<const std::size_t> assignments) {
  const auto p = detail::project(points, assignments);
  const std::size_t n = points.size();
  if (p.k < 2 || p.k >= n) throw NumericalError("Calinski-Harabasz needs 2 <= k < n");
  double between = 0.0, within = 0.0;
  for (std::size_t c = 0; c < p.k; ++c) {
    between += static_cast<double>(p.size[c]) * detail::sq(p.centroid[c], p.mean);
  }
  for (std::size_t i = 0; i < n; ++i) within += detail::sq(p.xy[i], p.centroid[p.lab[i]]);
  if (within == 0.0) return std::numeric_limits<double>::infinity();
  return (between / static_cast<double>(p.k - 1)) / (within / static_cast<double>(n - p.k));
}

/// Mean over clusters of max_{j != i} (s_i + s_j) / d_ij, with s the mean
/// distance of members to their centroid and d the centroid separation, all
/// in the tangent plane. Coincident centroids give +inf unless both
/// scatters are zero.
inline double davies_bouldin(std::span<const GeoPoint> points,
                             std::span<const std::size_t> assignments) {
  const auto p = detail::project(points, assignments);
  if (p.k < 2) throw NumericalError("Davies-Bouldin needs k >= 2");
  std::vector<double> s(p.k, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    s[p.lab[i]] += std::sqrt(detail::sq(p.xy[i], p.centroid[p.lab[i]]));
  }
  for (std::size_t c = 0; c < p.k; ++c) s[c] /= static_cast<double>(p.size[c]);
  double total = 0.0;
  for (std::size_t i = 0; i < p.k; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < p.k; ++j) {
      if (j == i) continue;
      const double d = std::sqrt(detail::sq(p.centroid[i], p.centroid[j]));
      const double num = s[i] + s[j];
      double r;
      if (d > 0.0) {
        r = num / d;
      } else {
        r = num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      }
      worst = std::max(worst, r);
    }
    total += worst;
  }
  return total / static_cast<double>(p.k);
}

inline ClusterEvalReport evaluate_clusters(std::span<const GeoPoint> points,
                                           std::span<const std::size_t> assignments) {
  std::size_t k = 0;
  detail::compact_labels(assignments, k);
  return {k, silhouette(points, assignments), calinski_harabasz(points, assignments),
          davies_bouldin(points, assignments)};
}

/// Macro-averaged recall/precision/F1 over the classes present in either the
/// truth or the predictions, plus MAE between theta rows and one-hot truth
/// averaged over passengers and classes. A class never predicted has
/// precision 0; F1 is 0 when precision + recall is 0.
inline PredictionReport prediction_metrics(std::span<const std::size_t> truth,
                                           std::span<const std::size_t> predicted,
                                           std::span<const std::vector<double>> theta_rows) {
  const std::size_t n = truth.size();
  if (n == 0) throw NumericalError("empty evaluation set");
  if (predicted.size() != n || theta_rows.size() != n) {
    throw InputError("prediction inputs are not aligned");
  }
  std::set<std::size_t> classes(truth.begin(), truth.end());
  classes.insert(predicted.begin(), predicted.end());
  PredictionReport r;
  r.n = n;
  for (const auto c : classes) {
    std::size_t tp = 0, support = 0, called = 0;
    for (std::size_t i = 0; i < n; ++i) {
      support += truth[i] == c;
      called += predicted[i] == c;
      tp += truth[i] == c && predicted[i] == c;
    }
    const double rec = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    const double prec = called ? static_cast<double>(tp) / static_cast<double>(called) : 0.0;
    r.recall += rec;
    r.precision += prec;
    r.f1 += (rec + prec) > 0.0 ? 2.0 * rec * prec / (rec + prec) : 0.0;
  }
  const double nc = static_cast<double>(classes.size());
  r.recall /= nc;
  r.precision /= nc;
  r.f1 /= nc;

  double abs_sum = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = theta_rows[i];
    if (truth[i] >= row.size()) throw InputError("true class outside theta row");
    for (std::size_t c = 0; c < row.size(); ++c) {
      abs_sum += std::abs(row[c] - (c == truth[i] ? 1.0 : 0.0));
      ++cells;
    }
  }
  r.mae = cells ? abs_sum / static_cast<double>(cells) : 0.0;
  return r;
}

}  // namespace poitrav
