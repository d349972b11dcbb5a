#pragma once

// Synthetic cities and passengers with planted ground truth.
//
// City: for each label, Gaussian blobs of POIs at random centers inside a
// square extent, with a minimum separation between any two blob centers.
// Passengers: a true class per attribute; each trajectory record lands near
// a POI of a label drawn uniformly from the union of the labels seeding the
// passenger's classes, or (with probability `noise`) near a POI drawn
// uniformly from the whole city.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "poitrav/csv.hpp"
#include "poitrav/error.hpp"
#include "poitrav/geo.hpp"
#include "poitrav/ingest.hpp"
#include "poitrav/labels.hpp"
#include "poitrav/plda.hpp"
#include "poitrav/rng.hpp"

namespace poitrav {

struct SynthConfig {
  std::uint64_t rng_seed = 42;
  std::vector<PoiLabel> labels{kAllLabels.begin(), kAllLabels.end()};
  std::size_t n_blobs_per_label = 3;
  /// Per-label blob count overriding n_blobs_per_label.
  std::map<PoiLabel, std::size_t> blobs_override;
  std::size_t pois_per_blob = 12;
  double blob_sigma_m = 100.0;
  GeoPoint city_center{109.49, 36.60};
  double city_extent_deg = 0.4;
  double min_blob_separation_m = 2000.0;

  std::size_t n_passengers = 200;
  std::size_t records_min = 120;
  std::size_t records_max = 180;
  double visit_sigma_m = 30.0;
  double noise = 0.2;
  std::vector<std::string> active_attributes{kAttributeNames.begin(), kAttributeNames.end()};
  /// Class sampling weights per attribute; uniform when absent.
  std::map<std::string, std::vector<double>> class_weights;
  Timestamp window_start = *parse_timestamp("2018/1/1 00:00:00");
  Timestamp window_end = *parse_timestamp("2018/6/30 23:59:59");

  void validate() const {
    if (!(blob_sigma_m > 0.0)) throw ConfigError("blob_sigma_m must be > 0");
    if (!(visit_sigma_m >= 0.0)) throw ConfigError("visit_sigma_m must be >= 0");
    if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("noise must be in [0, 1]");
    if (!(city_extent_deg > 0.0)) throw ConfigError("city_extent_deg must be > 0");
    if (records_min > records_max) throw ConfigError("records_min > records_max");
    if (window_end < window_start) throw ConfigError("time window is reversed");
    if (!is_valid(city_center)) throw ConfigError("invalid city center");
  }

  std::size_t blobs_for(PoiLabel l) const {
    const auto it = blobs_override.find(l);
    return it == blobs_override.end() ? n_blobs_per_label : it->second;
  }
};

struct PlantedBlob {
  PoiLabel label = PoiLabel::food;
  GeoPoint center;
  std::size_t first_poi = 0;
  std::size_t n_pois = 0;
};

struct City {
  std::vector<PoiRecord> pois;
  std::vector<PlantedBlob> blobs;

  /// Arithmetic mean of the blob's generated POI coordinates.
  GeoPoint blob_mean(const PlantedBlob& b) const {
    double lng = 0, lat = 0;
    for (std::size_t i = 0; i < b.n_pois; ++i) {
      lng += pois[b.first_poi + i].location.lng;
      lat += pois[b.first_poi + i].location.lat;
    }
    return {lng / static_cast<double>(b.n_pois), lat / static_cast<double>(b.n_pois)};
  }
};

namespace detail {

inline GeoPoint jitter(Rng& rng, const GeoPoint& at, double sigma_m) {
  const double e = standard_normal(rng) * sigma_m;
  const double n = standard_normal(rng) * sigma_m;
  return displace(at, {e, n});
}

}  // namespace detail

inline City generate_city(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.rng_seed, 1));
  City city;
  const double half = cfg.city_extent_deg / 2.0;
  for (const auto label : cfg.labels) {
    for (std::size_t b = 0; b < cfg.blobs_for(label); ++b) {
      GeoPoint c;
      for (int tries = 0;; ++tries) {
        if (tries == 100000) throw ConfigError("cannot place blobs with the requested separation");
        c = {cfg.city_center.lng + (uniform01(rng) * 2.0 - 1.0) * half,
             cfg.city_center.lat + (uniform01(rng) * 2.0 - 1.0) * half};
        const bool clear = std::all_of(city.blobs.begin(), city.blobs.end(), [&](const auto& o) {
          return haversine_m(o.center, c) >= cfg.min_blob_separation_m;
        });
        if (clear) break;
      }
      PlantedBlob blob{label, c, city.pois.size(), cfg.pois_per_blob};
      for (std::size_t i = 0; i < cfg.pois_per_blob; ++i) {
        PoiRecord p;
        p.location = detail::jitter(rng, c, cfg.blob_sigma_m);
        p.name = fmt::format("{} {}-{}", label_name(label), b, i);
        p.label = label;
        p.city = "Synthville";
        p.area = fmt::format("{}-{}", label_name(label), b);
        p.address = fmt::format("No. {}, {} block {}", i + 1, label_name(label), b);
        city.pois.push_back(std::move(p));
      }
      city.blobs.push_back(blob);
    }
  }
  return city;
}

/// True class index per attribute name.
using TrueProfile = std::map<std::string, std::size_t>;

struct SynthPassengers {
  std::vector<TrajectoryRecord> records;
  /// Index into city.pois that each record was sampled around.
  std::vector<std::size_t> visit_poi;
  std::map<std::string, TrueProfile> truth;
};

inline SynthPassengers generate_passengers(const SynthConfig& cfg, const City& city) {
  cfg.validate();
  if (city.pois.empty()) throw InputError("city has no POIs");
  const auto attrs = builtin_attributes();
  for (const auto& a : cfg.active_attributes) find_attribute(attrs, a);

  std::map<PoiLabel, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < city.pois.size(); ++i) by_label[city.pois[i].label].push_back(i);

  Rng rng(derive_seed(cfg.rng_seed, 2));
  SynthPassengers out;
  const auto span = static_cast<std::uint64_t>(cfg.window_end.seconds - cfg.window_start.seconds + 1);
  for (std::size_t p = 0; p < cfg.n_passengers; ++p) {
    const std::string uid = fmt::format("P{:05}", p);
    TrueProfile prof;
    for (const auto& a : attrs) {
      const auto it = cfg.class_weights.find(a.name);
      std::size_t cls;
      if (it == cfg.class_weights.end()) {
        cls = static_cast<std::size_t>(uniform_index(rng, a.k_classes));
      } else {
        const auto& w = it->second;
        if (w.size() != a.k_classes) throw ConfigError(a.name + ": class weight count != k");
        double total = 0;
        for (double x : w) total += x;
        double u = uniform01(rng) * total;
        cls = 0;
        while (cls + 1 < w.size() && !(u < w[cls])) u -= w[cls++];
      }
      prof[a.name] = cls;
    }
    std::set<PoiLabel> union_labels;
    for (const auto& name : cfg.active_attributes) {
      const auto& a = find_attribute(attrs, name);
      for (auto l : a.seeds[prof[name]]) {
        if (by_label.contains(l)) union_labels.insert(l);
      }
    }
    const std::vector<PoiLabel> pool(union_labels.begin(), union_labels.end());

    const auto n_rec = cfg.records_min +
                       static_cast<std::size_t>(uniform_index(rng, cfg.records_max - cfg.records_min + 1));
    for (std::size_t r = 0; r < n_rec; ++r) {
      std::size_t poi;
      if (pool.empty() || uniform01(rng) < cfg.noise) {
        poi = static_cast<std::size_t>(uniform_index(rng, city.pois.size()));
      } else {
        const auto& members = by_label.at(pool[uniform_index(rng, pool.size())]);
        poi = members[uniform_index(rng, members.size())];
      }
      TrajectoryRecord rec;
      rec.uid = uid;
      rec.location = detail::jitter(rng, city.pois[poi].location, cfg.visit_sigma_m);
      rec.up_time = {cfg.window_start.seconds + static_cast<std::int64_t>(uniform_index(rng, span))};
      out.records.push_back(std::move(rec));
      out.visit_poi.push_back(poi);
    }
    out.truth.emplace(uid, std::move(prof));
  }
  return out;
}

inline std::string ground_truth_to_csv(const std::map<std::string, TrueProfile>& truth) {
  const auto attrs = builtin_attributes();
  csv::Writer w;
  std::vector<std::string> header{"uid"};
  for (const auto& a : attrs) header.push_back(a.name);
  w.row(header);
  for (const auto& [uid, prof] : truth) {
    std::vector<std::string> row{uid};
    for (const auto& a : attrs) {
      const auto it = prof.find(a.name);
      row.push_back(it == prof.end() ? "" : a.class_names[it->second]);
    }
    w.row(row);
  }
  return w.str();
}

/// Reads ground_truth.csv (uid plus one column per attribute, class names).
inline std::map<std::string, TrueProfile> ground_truth_from_csv(std::string_view text) {
  const auto attrs = builtin_attributes();
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0].empty() || rows[0][0] != "uid") {
    throw InputError("malformed ground truth header");
  }
  std::map<std::string, TrueProfile> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    TrueProfile prof;
    for (std::size_t c = 1; c < rows[0].size() && c < rows[r].size(); ++c) {
      if (rows[r][c].empty()) continue;
      const auto& a = find_attribute(attrs, rows[0][c]);
      const auto k = a.class_index(rows[r][c]);
      if (!k) throw InputError(fmt::format("ground truth line {}: unknown class '{}'", r + 1, rows[r][c]));
      prof[a.name] = *k;
    }
    out[rows[r][0]] = std::move(prof);
  }
  return out;
}

inline std::string blobs_to_csv(const City& city) {
  csv::Writer w;
  w.row({"label", "blob", "center_lng", "center_lat", "mean_lng", "mean_lat", "n_pois"});
  std::map<PoiLabel, std::size_t> seen;
  for (const auto& b : city.blobs) {
    const auto m = city.blob_mean(b);
    w.row({std::string(label_name(b.label)), fmt::format("{}", seen[b.label]++),
           fmt::format("{}", b.center.lng), fmt::format("{}", b.center.lat), fmt::format("{}", m.lng),
           fmt::format("{}", m.lat), fmt::format("{}", b.n_pois)});
  }
  return w.str();
}

}  // namespace poitrav
