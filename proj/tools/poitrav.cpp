// poitrav: batch command-line front end for the travel-feature toolkit.
//
//   poitrav synth    --config cfg.json --out run/
//   poitrav pipeline --config cfg.json --out run/
//   poitrav eval     --config cfg.json --out run/ --ground-truth run/ground_truth.csv
//
// Exit codes: 0 success, 2 configuration error, 3 input data error,
// 4 numerical or degenerate-data error.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "poitrav/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::string poi_csv;
  std::string trajectory_csv;
  std::string ground_truth;
  std::uint64_t rng_seed = 0;
  std::size_t min_records = 0;
  double dis_m = 0.0;
  std::int64_t row_total = 0;
  std::string attributes;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

poitrav::PipelineConfig resolve(const Overrides& o, const CLI::App& app) {
  poitrav::PipelineConfig cfg = o.config.empty() ? poitrav::PipelineConfig{} : poitrav::load_config(o.config);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.poi_csv.empty()) cfg.poi_csv = o.poi_csv;
  if (!o.trajectory_csv.empty()) cfg.trajectory_csv = o.trajectory_csv;
  if (!o.ground_truth.empty()) cfg.ground_truth = o.ground_truth;
  if (app.count("--rng-seed") > 0) {
    cfg.rng_seed = o.rng_seed;
    cfg.synth.rng_seed = o.rng_seed;
  }
  if (app.count("--min-records") > 0) cfg.min_records = o.min_records;
  if (app.count("--dis-m") > 0) cfg.dis_m = o.dis_m;
  if (app.count("--row-total") > 0) cfg.row_total = o.row_total;
  if (!o.attributes.empty()) cfg.attributes = split_list(o.attributes);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mine passenger travel features from bus trajectories and POIs"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "run directory");
  app.add_option("--poi", o.poi_csv, "POI CSV (overrides config)");
  app.add_option("--trajectories", o.trajectory_csv, "trajectory CSV (overrides config)");
  app.add_option("--ground-truth", o.ground_truth, "ground truth CSV for eval");
  app.add_option("--rng-seed", o.rng_seed, "base random seed");
  app.add_option("--min-records", o.min_records, "keep passengers with more records than this (default 100)");
  app.add_option("--dis-m", o.dis_m, "POI search radius in metres (default 500)");
  app.add_option("--row-total", o.row_total, "pattern row total L (default 1000)");
  app.add_option("--attributes", o.attributes, "comma-separated attribute list (default all seven)");

  auto* seed = app.add_subcommand("seed", "Mean-Shift POI seeds per label");
  auto* cluster = app.add_subcommand("cluster", "seeded K-means, K sweep and life circles");
  auto* matrix = app.add_subcommand("matrix", "travel pattern matrix");
  auto* lda = app.add_subcommand("lda", "per-attribute seeded LDA and profiles");
  auto* eval = app.add_subcommand("eval", "held-out prediction metrics against ground truth");
  auto* synth = app.add_subcommand("synth", "generate a synthetic city and passengers");
  auto* pipeline = app.add_subcommand("pipeline", "seed, cluster, matrix, lda (and eval if ground truth is set)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(o, app);
    if (seed->parsed()) {
      const auto sets = poitrav::cmd_seed(cfg);
      std::size_t n = 0;
      for (const auto& s : sets) n += s.size();
      fmt::print("{} seeds over {} labels\n", n, sets.size());
    } else if (cluster->parsed()) {
      const auto r = poitrav::cmd_cluster(cfg);
      fmt::print("pooled K = {}, {} passengers with life circles, {} dropped\n", r.pooled.k,
                 r.circles.size(), r.dropped.size());
    } else if (matrix->parsed()) {
      const auto r = poitrav::cmd_matrix(cfg);
      fmt::print("{} matrix rows, {} dropped\n", r.matrix.passengers.size(), r.dropped.size());
    } else if (lda->parsed()) {
      const auto r = poitrav::cmd_lda(cfg);
      fmt::print("{} attributes fitted, {} train / {} test\n", r.fits.size(), r.split.train.size(),
                 r.split.test.size());
    } else if (eval->parsed()) {
      const auto r = poitrav::cmd_eval(cfg, cfg.ground_truth);
      for (const auto& [name, rep] : r.per_attribute) {
        fmt::print("{:12} recall {:.3f} precision {:.3f} f1 {:.3f} mae {:.3f}\n", name, rep.recall,
                   rep.precision, rep.f1, rep.mae);
      }
    } else if (synth->parsed()) {
      const auto r = poitrav::cmd_synth(cfg);
      fmt::print("{} POIs, {} trajectory records, {} passengers\n", r.city.pois.size(),
                 r.passengers.records.size(), r.passengers.truth.size());
    } else if (pipeline->parsed()) {
      const auto r = poitrav::cmd_pipeline(cfg);
      fmt::print("pipeline done: {} matrix rows\n", r.matrix.matrix.passengers.size());
      if (r.eval) {
        fmt::print("macro recall {:.3f}\n", r.eval->macro_mean.recall);
      }
    }
  } catch (const poitrav::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const poitrav::InputError& e) {
    fmt::print(stderr, "input error: {}\n", e.what());
    return 3;
  } catch (const poitrav::NumericalError& e) {
    fmt::print(stderr, "numerical error: {}\n", e.what());
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(stderr, "input error: {}\n", e.what());
    return 3;
  }
  return 0;
}
