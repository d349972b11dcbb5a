#pragma once

// Batch pipeline stages behind the command-line tool. Every stage reads its
// inputs from files and writes CSVs into the run directory; each file is
// replaced atomically.
//
// Run directory layout:
//   seeds.csv            label,lng,lat,member_count
//   poi_dropped.csv      reason,count
//   centers.csv          k,lng,lat,n_k            (pooled seeded model)
//   assignments.csv      point_index,cluster
//   ksweep.csv           k,silhouette,calinski_harabasz,davies_bouldin,seeded
//   life_circles.csv     uid,circle,lng,lat,radius_m,n_k
//   matrix.csv           uid,food,...,government
//   dropped.csv          uid,stage,reason
//   split.csv            uid,set
//   lda/<attr>/theta.csv, phi.csv, consistency.csv
//   profiles.csv         uid,age_class,...,personality_class
//   eval.csv             attribute,n,recall,precision,f1,mae

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "poitrav/csv.hpp"
#include "poitrav/error.hpp"
#include "poitrav/ingest.hpp"
#include "poitrav/labels.hpp"
#include "poitrav/meanshift.hpp"
#include "poitrav/metrics.hpp"
#include "poitrav/pkmeans.hpp"
#include "poitrav/plda.hpp"
#include "poitrav/poi_matrix.hpp"
#include "poitrav/rng.hpp"
#include "poitrav/synthgen.hpp"

namespace poitrav {

namespace fs = std::filesystem;

struct PipelineConfig {
  fs::path poi_csv;
  fs::path trajectory_csv;
  fs::path out_dir = "run";
  fs::path ground_truth;

  MeanShiftConfig meanshift;
  std::vector<PoiLabel> seed_labels{kAllLabels.begin(), kAllLabels.end()};

  double kmeans_epsilon = 0.01;
  std::size_t kmeans_max_iter = 300;
  std::size_t sweep_k_min = 2;
  std::size_t sweep_k_max = 12;
  std::size_t sweep_runs = 10;
  std::size_t sweep_max_points = 2000;

  double dis_m = 500.0;
  std::int64_t row_total = 1000;

  double alpha = -1.0;
  double beta = 0.01;
  double beta_seed = 1.0;
  std::size_t n_sweeps = 2000;
  std::size_t lda_restarts = 3;
  std::size_t infer_sweeps = 50;
  double train_fraction = 0.8;
  std::vector<std::string> attributes{kAttributeNames.begin(), kAttributeNames.end()};

  std::uint64_t rng_seed = 1;
  std::size_t min_records = 100;

  SynthConfig synth;

  void validate() const {
    meanshift.validate();
    if (!(dis_m > 0.0)) throw ConfigError("dis_m must be > 0");
    if (row_total < 1) throw ConfigError("row_total must be >= 1");
    if (sweep_k_min < 2 || sweep_k_max < sweep_k_min) throw ConfigError("bad K sweep range");
    if (lda_restarts < 1) throw ConfigError("lda_restarts must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must be in (0, 1]");
    if (!(kmeans_epsilon >= 0.0)) throw ConfigError("kmeans_epsilon must be >= 0");
    const auto all = builtin_attributes();
    for (const auto& a : attributes) find_attribute(all, a);
    LdaHyper{alpha, beta, beta_seed, n_sweeps, rng_seed}.validate();
    synth.validate();
  }
};

namespace detail {

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline std::vector<PoiLabel> labels_from(const std::vector<std::string>& names) {
  std::vector<PoiLabel> out;
  for (const auto& n : names) {
    const auto l = label_from_name(n);
    if (!l) throw ConfigError("unknown label " + n);
    out.push_back(*l);
  }
  return out;
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "poi_csv", "trajectory_csv", "out_dir", "ground_truth", "meanshift", "seed_labels",
      "kmeans_epsilon", "kmeans_max_iter", "sweep_k_min", "sweep_k_max", "sweep_runs",
      "sweep_max_points", "dis_m", "row_total", "alpha", "beta", "beta_seed", "n_sweeps",
      "lda_restarts", "infer_sweeps", "train_fraction", "attributes", "rng_seed", "min_records",
      "synth"};
  return keys;
}

}  // namespace detail

/// Applies a JSON object on top of `cfg`. Unknown keys are an error.
inline void apply_json(PipelineConfig& cfg, const nlohmann::json& j) {
  using detail::take;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
      if (!detail::known_keys().contains(key)) throw ConfigError("unknown config key " + key);
    }
    std::string s;
    if (j.contains("poi_csv")) cfg.poi_csv = j.at("poi_csv").get<std::string>();
    if (j.contains("trajectory_csv")) cfg.trajectory_csv = j.at("trajectory_csv").get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("ground_truth")) cfg.ground_truth = j.at("ground_truth").get<std::string>();
    if (j.contains("meanshift")) {
      const auto& m = j.at("meanshift");
      take(m, "bandwidth_h", cfg.meanshift.bandwidth_h);
      take(m, "epsilon", cfg.meanshift.epsilon);
      take(m, "max_iter", cfg.meanshift.max_iter);
      take(m, "merge_radius", cfg.meanshift.merge_radius);
      if (m.contains("kernel")) {
        const auto k = m.at("kernel").get<std::string>();
        if (k == "flat") cfg.meanshift.kernel = Kernel::flat;
        else if (k == "gaussian") cfg.meanshift.kernel = Kernel::gaussian;
        else throw ConfigError("unknown kernel " + k);
      }
    }
    if (j.contains("seed_labels")) {
      cfg.seed_labels = detail::labels_from(j.at("seed_labels").get<std::vector<std::string>>());
    }
    take(j, "kmeans_epsilon", cfg.kmeans_epsilon);
    take(j, "kmeans_max_iter", cfg.kmeans_max_iter);
    take(j, "sweep_k_min", cfg.sweep_k_min);
    take(j, "sweep_k_max", cfg.sweep_k_max);
    take(j, "sweep_runs", cfg.sweep_runs);
    take(j, "sweep_max_points", cfg.sweep_max_points);
    take(j, "dis_m", cfg.dis_m);
    take(j, "row_total", cfg.row_total);
    take(j, "alpha", cfg.alpha);
    take(j, "beta", cfg.beta);
    take(j, "beta_seed", cfg.beta_seed);
    take(j, "n_sweeps", cfg.n_sweeps);
    take(j, "lda_restarts", cfg.lda_restarts);
    take(j, "infer_sweeps", cfg.infer_sweeps);
    take(j, "train_fraction", cfg.train_fraction);
    take(j, "attributes", cfg.attributes);
    take(j, "rng_seed", cfg.rng_seed);
    take(j, "min_records", cfg.min_records);
    if (j.contains("synth")) {
      const auto& y = j.at("synth");
      auto& sc = cfg.synth;
      take(y, "rng_seed", sc.rng_seed);
      if (y.contains("labels")) sc.labels = detail::labels_from(y.at("labels").get<std::vector<std::string>>());
      take(y, "n_blobs_per_label", sc.n_blobs_per_label);
      if (y.contains("blobs_override")) {
        for (const auto& [name, n] : y.at("blobs_override").items()) {
          sc.blobs_override[detail::labels_from({name}).front()] = n.get<std::size_t>();
        }
      }
      take(y, "pois_per_blob", sc.pois_per_blob);
      take(y, "blob_sigma_m", sc.blob_sigma_m);
      if (y.contains("city_center")) {
        const auto c = y.at("city_center").get<std::vector<double>>();
        if (c.size() != 2) throw ConfigError("city_center must be [lng, lat]");
        sc.city_center = {c[0], c[1]};
      }
      take(y, "city_extent_deg", sc.city_extent_deg);
      take(y, "min_blob_separation_m", sc.min_blob_separation_m);
      take(y, "n_passengers", sc.n_passengers);
      take(y, "records_min", sc.records_min);
      take(y, "records_max", sc.records_max);
      take(y, "visit_sigma_m", sc.visit_sigma_m);
      take(y, "noise", sc.noise);
      take(y, "active_attributes", sc.active_attributes);
      if (y.contains("class_weights")) {
        sc.class_weights = y.at("class_weights").get<std::map<std::string, std::vector<double>>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline PipelineConfig load_config(const fs::path& path) {
  PipelineConfig cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  apply_json(cfg, j);
  return cfg;
}

namespace detail {

inline std::vector<PoiRecord> load_pois(const PipelineConfig& cfg, DropReport* report = nullptr) {
  if (cfg.poi_csv.empty()) throw ConfigError("poi_csv is not set");
  auto loaded = load_poi_csv(cfg.poi_csv);
  if (report) *report = loaded.dropped;
  return dedup_poi(loaded.records);
}

inline Partition load_passengers(const PipelineConfig& cfg) {
  if (cfg.trajectory_csv.empty()) throw ConfigError("trajectory_csv is not set");
  const auto loaded = load_trajectory_csv(cfg.trajectory_csv);
  return filter_min_records(partition_by_uid(loaded.records), cfg.min_records);
}

inline fs::path out(const PipelineConfig& cfg, const fs::path& rel) { return cfg.out_dir / rel; }

inline std::string fmt_num(double x) { return fmt::format("{}", x); }

struct DroppedRow {
  std::string uid, stage, reason;
};

inline std::string dropped_to_csv(const std::vector<DroppedRow>& rows) {
  csv::Writer w;
  w.row({"uid", "stage", "reason"});
  for (const auto& r : rows) w.row({r.uid, r.stage, r.reason});
  return w.str();
}

inline std::vector<DroppedRow> dropped_from_csv(const fs::path& p) {
  std::vector<DroppedRow> out;
  if (!fs::exists(p)) return out;
  const auto rows = csv::read(p);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() >= 3) out.push_back({rows[r][0], rows[r][1], rows[r][2]});
  }
  return out;
}

// Replaces this stage's rows in dropped.csv, keeping other stages' rows.
inline void write_dropped(const PipelineConfig& cfg, const std::string& stage,
                          const std::vector<DroppedRow>& rows) {
  auto all = dropped_from_csv(out(cfg, "dropped.csv"));
  std::erase_if(all, [&](const DroppedRow& r) { return r.stage == stage; });
  all.insert(all.end(), rows.begin(), rows.end());
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return std::tie(a.stage, a.uid) < std::tie(b.stage, b.uid);
  });
  csv::write_atomic(out(cfg, "dropped.csv"), dropped_to_csv(all));
}

inline SeedSet merge_seed_sets(const std::vector<SeedSet>& sets) {
  SeedSet all;
  for (const auto& s : sets) {
    all.seeds.insert(all.seeds.end(), s.seeds.begin(), s.seeds.end());
    all.member_count.insert(all.member_count.end(), s.member_count.begin(), s.member_count.end());
  }
  return all;
}

}  // namespace detail

// ---------------------------------------------------------------- seed

/// Mean-Shift seeds per configured label; labels without POIs contribute
/// nothing. Writes seeds.csv and poi_dropped.csv.
inline std::vector<SeedSet> cmd_seed(const PipelineConfig& cfg) {
  cfg.validate();
  DropReport report;
  const auto pois = detail::load_pois(cfg, &report);
  std::vector<SeedSet> sets;
  for (const auto label : cfg.seed_labels) {
    std::vector<GeoPoint> pts;
    for (const auto& p : pois) {
      if (p.label == label) pts.push_back(p.location);
    }
    if (pts.empty()) continue;
    sets.push_back(mean_shift_cluster(pts, cfg.meanshift, label));
  }
  csv::write_atomic(detail::out(cfg, "seeds.csv"), seeds_to_csv(sets));
  csv::Writer w;
  w.row({"reason", "count"});
  for (const auto& [reason, n] : report.counts) w.row({reason, fmt::format("{}", n)});
  csv::write_atomic(detail::out(cfg, "poi_dropped.csv"), w.str());
  return sets;
}

// ---------------------------------------------------------------- cluster

struct SweepRow {
  std::size_t k = 0;
  ClusterEvalReport eval;
  bool seeded = false;
  double inertia = 0.0;
  std::size_t n_iterations = 0;
};

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  csv::Writer w;
  w.row({"k", "silhouette", "calinski_harabasz", "davies_bouldin", "seeded"});
  for (const auto& r : rows) {
    w.row({fmt::format("{}", r.k), detail::fmt_num(r.eval.silhouette),
           detail::fmt_num(r.eval.calinski_harabasz), detail::fmt_num(r.eval.davies_bouldin),
           r.seeded ? "true" : "false"});
  }
  return w.str();
}

/// Seeded K sweep (see sweep_initial_centers) plus `runs` unseeded fits per
/// K, all on the same points.
inline std::vector<SweepRow> k_sweep(std::span<const GeoPoint> points, const SeedSet& seeds,
                                     std::size_t k_min, std::size_t k_max, std::size_t runs,
                                     std::uint64_t rng_seed, double epsilon, std::size_t max_iter) {
  std::vector<SweepRow> rows;
  if (points.size() < 3) return rows;
  const DistanceMatrix dist(points);
  auto score = [&](const ClusterModel& m, bool seeded) {
    SweepRow r;
    r.k = m.k;
    r.seeded = seeded;
    r.inertia = m.inertia;
    r.n_iterations = m.n_iterations;
    r.eval.k = m.k;
    r.eval.silhouette = silhouette(dist, m.assignments);
    r.eval.calinski_harabasz = calinski_harabasz(points, m.assignments);
    r.eval.davies_bouldin = davies_bouldin(points, m.assignments);
    return r;
  };
  for (std::size_t k = k_min; k <= k_max && k < points.size(); ++k) {
    if (seeds.size() > 0) {
      const auto init = sweep_initial_centers(points, seeds, k);
      rows.push_back(score(p_kmeans(points, init, epsilon, max_iter), true));
    }
    for (std::size_t r = 0; r < runs; ++r) {
      const auto m = unseeded_kmeans(points, k, derive_seed(rng_seed, 1000 * k + r), epsilon, max_iter);
      rows.push_back(score(m, false));
    }
  }
  return rows;
}

struct ClusterOutput {
  ClusterModel pooled;
  std::vector<SweepRow> sweep;
  std::map<std::string, std::vector<LifeCircle>> circles;
  std::vector<detail::DroppedRow> dropped;
};

inline std::string circles_to_csv(const std::map<std::string, std::vector<LifeCircle>>& circles) {
  csv::Writer w;
  w.row({"uid", "circle", "lng", "lat", "radius_m", "n_k"});
  for (const auto& [uid, list] : circles) {
    for (std::size_t c = 0; c < list.size(); ++c) {
      w.row({uid, fmt::format("{}", c), detail::fmt_num(list[c].center.lng),
             detail::fmt_num(list[c].center.lat), detail::fmt_num(list[c].radius_m),
             fmt::format("{}", list[c].n_k)});
    }
  }
  return w.str();
}

inline std::map<std::string, std::vector<LifeCircle>> circles_from_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0].size() != 6 || rows[0][0] != "uid") {
    throw InputError("malformed life_circles header");
  }
  std::map<std::string, std::vector<LifeCircle>> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    LifeCircle c;
    if (row.size() != 6 || !csv::parse_double(row[2], c.center.lng) ||
        !csv::parse_double(row[3], c.center.lat) || !csv::parse_double(row[4], c.radius_m) ||
        !csv::parse_int(row[5], c.n_k) || !is_valid(c.center)) {
      throw InputError(fmt::format("life_circles line {}: malformed", r + 1));
    }
    out[row[0]].push_back(c);
  }
  return out;
}

/// Pooled seeded clustering of all retained passengers' points, the K sweep
/// on a deterministic subsample, and per-passenger seeded clustering into
/// life circles. Reads seeds.csv from the run directory.
inline ClusterOutput cmd_cluster(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path seeds_path = detail::out(cfg, "seeds.csv");
  if (!fs::exists(seeds_path)) throw InputError("seeds.csv not found; run `seed` first");
  const SeedSet seeds = detail::merge_seed_sets(seeds_from_csv(csv::read_file(seeds_path)));
  if (seeds.size() == 0) throw NumericalError("no POI seeds to cluster with");
  const auto passengers = detail::load_passengers(cfg);

  std::vector<GeoPoint> pooled;
  for (const auto& [_, list] : passengers) {
    for (const auto& r : list) pooled.push_back(r.location);
  }
  if (pooled.size() < seeds.size()) {
    throw NumericalError(fmt::format("{} pooled points for {} seeds", pooled.size(), seeds.size()));
  }

  ClusterOutput out;
  out.pooled = p_kmeans(pooled, seeds, cfg.kmeans_epsilon, cfg.kmeans_max_iter);

  std::vector<std::size_t> idx(pooled.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (idx.size() > cfg.sweep_max_points) {
    Rng rng(derive_seed(cfg.rng_seed, 0x5eed));
    for (std::size_t i = 0; i < cfg.sweep_max_points; ++i) {
      std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
    }
    idx.resize(cfg.sweep_max_points);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<GeoPoint> sample;
  sample.reserve(idx.size());
  for (auto i : idx) sample.push_back(pooled[i]);
  out.sweep = k_sweep(sample, seeds, cfg.sweep_k_min, cfg.sweep_k_max, cfg.sweep_runs, cfg.rng_seed,
                      cfg.kmeans_epsilon, cfg.kmeans_max_iter);

  for (const auto& [uid, list] : passengers) {
    if (list.size() < seeds.size()) {
      out.dropped.push_back({uid, "cluster", "fewer_points_than_seeds"});
      continue;
    }
    std::vector<GeoPoint> pts;
    pts.reserve(list.size());
    for (const auto& r : list) pts.push_back(r.location);
    const auto model = p_kmeans(pts, seeds, cfg.kmeans_epsilon, cfg.kmeans_max_iter);
    out.circles[uid] = life_circles(model, cfg.dis_m);
  }

  csv::write_atomic(detail::out(cfg, "centers.csv"), centers_to_csv(out.pooled));
  csv::write_atomic(detail::out(cfg, "assignments.csv"), assignments_to_csv(out.pooled));
  csv::write_atomic(detail::out(cfg, "ksweep.csv"), sweep_to_csv(out.sweep));
  csv::write_atomic(detail::out(cfg, "life_circles.csv"), circles_to_csv(out.circles));
  detail::write_dropped(cfg, "cluster", out.dropped);
  return out;
}

// ---------------------------------------------------------------- matrix

struct MatrixOutput {
  TravelPatternMatrix matrix;
  std::vector<detail::DroppedRow> dropped;
};

/// Pattern rows from life circles and POIs.
inline MatrixOutput build_matrix(const std::map<std::string, std::vector<LifeCircle>>& circles,
                                 std::span<const PoiRecord> pois, double dis_m, std::int64_t row_total) {
  MatrixOutput out;
  out.matrix.row_total = row_total;
  const PoiIndex index(pois, dis_m);
  for (const auto& [uid, list] : circles) {
    std::vector<std::pair<LifeCircle, std::optional<LabelMassVector>>> with_mass;
    for (auto c : list) {
      c.radius_m = dis_m;
      with_mass.emplace_back(c, normalize_cluster(index.mass(c)));
    }
    const auto row = passenger_pattern(with_mass, row_total);
    if (!row) {
      out.dropped.push_back({uid, "matrix", "all_life_circles_empty"});
      continue;
    }
    out.matrix.passengers.push_back(uid);
    out.matrix.counts.push_back(row->counts);
  }
  return out;
}

inline MatrixOutput cmd_matrix(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path circles_path = detail::out(cfg, "life_circles.csv");
  if (!fs::exists(circles_path)) throw InputError("life_circles.csv not found; run `cluster` first");
  const auto circles = circles_from_csv(csv::read_file(circles_path));
  const auto pois = detail::load_pois(cfg);
  auto out = build_matrix(circles, pois, cfg.dis_m, cfg.row_total);
  csv::write_atomic(detail::out(cfg, "matrix.csv"), matrix_to_csv(out.matrix));
  detail::write_dropped(cfg, "matrix", out.dropped);
  return out;
}

// ---------------------------------------------------------------- lda

/// Deterministic shuffle of the passenger list; the first
/// floor(train_fraction * M) go to training, the rest are held out.
struct Split {
  std::vector<std::string> train, test;
};

inline Split split_train_test(std::vector<std::string> uids, double train_fraction, std::uint64_t rng_seed) {
  std::sort(uids.begin(), uids.end());
  Rng rng(derive_seed(rng_seed, 0x5b117));
  for (std::size_t i = uids.size(); i > 1; --i) {
    std::swap(uids[i - 1], uids[uniform_index(rng, i)]);
  }
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(uids.size())));
  Split s;
  s.train.assign(uids.begin(), uids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(uids.begin() + static_cast<std::ptrdiff_t>(n_train), uids.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

struct AttributeFit {
  LdaModel model;  // training rows first, then held-out rows inferred with phi fixed
  std::vector<double> restart_scores;
  std::vector<std::uint64_t> restart_seeds;
  std::size_t selected = 0;
  std::size_t n_train_rows = 0;
};

/// Fits `restarts` chains on the training rows and keeps the one with the
/// highest consistency score (first on ties), then folds in held-out rows.
inline AttributeFit fit_attribute(const TravelPatternMatrix& x, const AttributeConfig& attr,
                                  const Split& split, const PipelineConfig& cfg, std::uint64_t attr_salt) {
  const Corpus train = restrict_to_vocab(x, attr, split.train);
  AttributeFit fit;
  std::optional<LdaModel> best;
  double best_score = 0.0;
  for (std::size_t r = 0; r < cfg.lda_restarts; ++r) {
    const std::uint64_t seed = derive_seed(derive_seed(cfg.rng_seed, attr_salt), r);
    LdaModel m = fit_plda(train, attr, {cfg.alpha, cfg.beta, cfg.beta_seed, cfg.n_sweeps, seed});
    const double score = consistency_score(m, train);
    fit.restart_scores.push_back(score);
    fit.restart_seeds.push_back(seed);
    if (!best || score > best_score) {
      best = std::move(m);
      best_score = score;
      fit.selected = r;
    }
  }
  fit.model = std::move(*best);
  fit.n_train_rows = fit.model.uids.size();

  const Corpus test = restrict_to_vocab(x, attr, split.test);
  for (std::size_t d = 0; d < test.uids.size(); ++d) {
    const auto seed = derive_seed(fit.model.rng_seed, 0xf01d + d);
    fit.model.theta.push_back(infer_theta(fit.model, test.counts[d], cfg.infer_sweeps, seed));
    fit.model.uids.push_back(test.uids[d]);
  }
  fit.model.excluded.insert(fit.model.excluded.end(), test.excluded.begin(), test.excluded.end());
  return fit;
}

struct LdaOutput {
  Split split;
  std::map<std::string, AttributeFit> fits;
  std::vector<AttributeProfile> profiles;
};

inline std::string profiles_to_csv(const std::vector<AttributeProfile>& profiles) {
  csv::Writer w;
  std::vector<std::string> header{"uid"};
  for (auto a : kAttributeNames) header.push_back(fmt::format("{}_class", a));
  w.row(header);
  for (const auto& p : profiles) {
    std::vector<std::string> row{p.uid};
    for (auto a : kAttributeNames) {
      const auto* e = p.find(a);
      row.push_back(e ? e->class_name : "");
    }
    w.row(row);
  }
  return w.str();
}

/// Reads theta.csv back as uid -> row.
inline std::map<std::string, std::vector<double>> theta_from_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0].empty() || rows[0][0] != "uid") throw InputError("malformed theta header");
  std::map<std::string, std::vector<double>> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::vector<double> row;
    for (std::size_t c = 1; c < rows[r].size(); ++c) {
      double v;
      if (!csv::parse_double(rows[r][c], v)) throw InputError(fmt::format("theta line {}: malformed", r + 1));
      row.push_back(v);
    }
    out[rows[r][0]] = std::move(row);
  }
  return out;
}

inline LdaOutput cmd_lda(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path matrix_path = detail::out(cfg, "matrix.csv");
  if (!fs::exists(matrix_path)) throw InputError("matrix.csv not found; run `matrix` first");
  const auto x = matrix_from_csv(csv::read_file(matrix_path));
  const auto all = builtin_attributes();

  LdaOutput out;
  out.split = split_train_test(x.passengers, cfg.train_fraction, cfg.rng_seed);

  std::vector<std::pair<std::string, std::future<AttributeFit>>> jobs;
  for (const auto& name : cfg.attributes) {
    const auto& attr = find_attribute(all, name);
    const auto salt = static_cast<std::uint64_t>(
        std::find(kAttributeNames.begin(), kAttributeNames.end(), name) - kAttributeNames.begin() + 100);
    jobs.emplace_back(name, std::async(std::launch::async, [&x, &attr, &out, &cfg, salt] {
                        return fit_attribute(x, attr, out.split, cfg, salt);
                      }));
  }
  for (auto& [name, job] : jobs) out.fits.emplace(name, job.get());

  std::map<std::string, LdaModel> models;
  for (const auto& [name, fit] : out.fits) {
    models.emplace(name, fit.model);
    const fs::path dir = detail::out(cfg, fs::path("lda") / name);
    csv::write_atomic(dir / "theta.csv", theta_to_csv(fit.model));
    csv::write_atomic(dir / "phi.csv", phi_to_csv(fit.model));
    csv::Writer w;
    w.row({"restart", "rng_seed", "score", "selected"});
    for (std::size_t r = 0; r < fit.restart_scores.size(); ++r) {
      w.row({fmt::format("{}", r), fmt::format("{}", fit.restart_seeds[r]),
             detail::fmt_num(fit.restart_scores[r]), r == fit.selected ? "true" : "false"});
    }
    csv::write_atomic(dir / "consistency.csv", w.str());
  }

  std::vector<detail::DroppedRow> dropped;
  for (const auto& uid : x.passengers) {
    try {
      out.profiles.push_back(infer_profile(models, uid));
    } catch (const NotFoundError&) {
      out.profiles.push_back({uid, {}, true});
    }
  }
  for (const auto& [name, fit] : out.fits) {
    for (const auto& uid : fit.model.excluded) dropped.push_back({uid, "lda:" + name, "no_vocabulary_mass"});
  }

  csv::Writer split_csv;
  split_csv.row({"uid", "set"});
  for (const auto& u : out.split.train) split_csv.row({u, "train"});
  for (const auto& u : out.split.test) split_csv.row({u, "test"});
  csv::write_atomic(detail::out(cfg, "split.csv"), split_csv.str());
  csv::write_atomic(detail::out(cfg, "profiles.csv"), profiles_to_csv(out.profiles));
  for (const auto& name : cfg.attributes) {
    std::vector<detail::DroppedRow> mine;
    for (const auto& d : dropped) {
      if (d.stage == "lda:" + name) mine.push_back(d);
    }
    detail::write_dropped(cfg, "lda:" + name, mine);
  }
  return out;
}

// ---------------------------------------------------------------- eval

struct EvalOutput {
  std::map<std::string, PredictionReport> per_attribute;
  PredictionReport macro_mean;
};

inline const char* kEvalNote =
    "# recall/precision/f1: macro-averaged over classes; mae: mean |theta - one_hot(true class)| "
    "over passengers and classes (declared interpretation); held-out split only";

/// Scores held-out passengers against ground truth, per attribute and as a
/// macro mean across attributes. Reads split.csv and lda/<attr>/theta.csv.
inline EvalOutput cmd_eval(const PipelineConfig& cfg, const fs::path& ground_truth) {
  cfg.validate();
  if (ground_truth.empty()) throw ConfigError("ground truth path is not set");
  const auto truth = ground_truth_from_csv(csv::read_file(ground_truth));
  const fs::path split_path = detail::out(cfg, "split.csv");
  if (!fs::exists(split_path)) throw InputError("split.csv not found; run `lda` first");
  std::set<std::string> test;
  const auto split_rows = csv::read(split_path);
  for (std::size_t r = 1; r < split_rows.size(); ++r) {
    if (split_rows[r].size() == 2 && split_rows[r][1] == "test") test.insert(split_rows[r][0]);
  }
  const auto all = builtin_attributes();

  EvalOutput out;
  for (const auto& name : cfg.attributes) {
    const auto& attr = find_attribute(all, name);
    const auto theta = theta_from_csv(csv::read_file(detail::out(cfg, fs::path("lda") / name / "theta.csv")));
    std::vector<std::size_t> t, p;
    std::vector<std::vector<double>> rows;
    for (const auto& uid : test) {
      const auto th = theta.find(uid);
      const auto gt = truth.find(uid);
      if (th == theta.end() || gt == truth.end()) continue;
      const auto cls = gt->second.find(name);
      if (cls == gt->second.end()) continue;
      if (th->second.size() != attr.k_classes) throw InputError(name + ": theta width != class count");
      t.push_back(cls->second);
      p.push_back(argmax(th->second));
      rows.push_back(th->second);
    }
    out.per_attribute[name] = prediction_metrics(t, p, rows);
  }
  const double n = static_cast<double>(out.per_attribute.size());
  for (const auto& [_, r] : out.per_attribute) {
    out.macro_mean.recall += r.recall / n;
    out.macro_mean.precision += r.precision / n;
    out.macro_mean.f1 += r.f1 / n;
    out.macro_mean.mae += r.mae / n;
    out.macro_mean.n += r.n;
  }

  csv::Writer w;
  w.raw_line(kEvalNote);
  w.row({"attribute", "n", "recall", "precision", "f1", "mae"});
  auto emit = [&](const std::string& name, const PredictionReport& r) {
    w.row({name, fmt::format("{}", r.n), detail::fmt_num(r.recall), detail::fmt_num(r.precision),
           detail::fmt_num(r.f1), detail::fmt_num(r.mae)});
  };
  for (const auto& name : cfg.attributes) emit(name, out.per_attribute.at(name));
  emit("macro_mean", out.macro_mean);
  csv::write_atomic(detail::out(cfg, "eval.csv"), w.str());
  return out;
}

// ---------------------------------------------------------------- synth

struct SynthOutput {
  City city;
  SynthPassengers passengers;
};

/// Writes pois.csv, trajectories.csv, ground_truth.csv and blobs.csv.
inline SynthOutput cmd_synth(const PipelineConfig& cfg) {
  cfg.synth.validate();
  SynthOutput out;
  out.city = generate_city(cfg.synth);
  out.passengers = generate_passengers(cfg.synth, out.city);
  csv::write_atomic(detail::out(cfg, "pois.csv"), to_csv(out.city.pois));
  csv::write_atomic(detail::out(cfg, "trajectories.csv"), to_csv(out.passengers.records));
  csv::write_atomic(detail::out(cfg, "ground_truth.csv"), ground_truth_to_csv(out.passengers.truth));
  csv::write_atomic(detail::out(cfg, "blobs.csv"), blobs_to_csv(out.city));
  return out;
}

// ---------------------------------------------------------------- pipeline

struct PipelineOutput {
  std::vector<SeedSet> seeds;
  ClusterOutput cluster;
  MatrixOutput matrix;
  LdaOutput lda;
  std::optional<EvalOutput> eval;
};

/// seed -> cluster -> matrix -> lda, then eval when a ground truth is set.
inline PipelineOutput cmd_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  PipelineOutput out;
  out.seeds = cmd_seed(cfg);
  out.cluster = cmd_cluster(cfg);
  out.matrix = cmd_matrix(cfg);
  out.lda = cmd_lda(cfg);
  if (!cfg.ground_truth.empty()) out.eval = cmd_eval(cfg, cfg.ground_truth);
  return out;
}

}  // namespace poitrav
