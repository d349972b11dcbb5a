#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "poitrav/pipeline.hpp"

using namespace poitrav;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("poitrav_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

PipelineConfig small_config(const fs::path& dir) {
  PipelineConfig cfg;
  cfg.out_dir = dir / "run";
  cfg.poi_csv = cfg.out_dir / "pois.csv";
  cfg.trajectory_csv = cfg.out_dir / "trajectories.csv";
  cfg.ground_truth = cfg.out_dir / "ground_truth.csv";
  cfg.synth.n_passengers = 40;
  cfg.sweep_max_points = 300;
  cfg.n_sweeps = 30;
  cfg.lda_restarts = 2;
  cfg.infer_sweeps = 10;
  return cfg;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = csv::read_file(e.path());
  }
  return out;
}

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(POITRAV_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, JsonOverridesAndUnknownKeys) {
  PipelineConfig cfg;
  apply_json(cfg, nlohmann::json::parse(
                      R"({"dis_m": 400, "meanshift": {"kernel": "gaussian", "bandwidth_h": 300},
                          "attributes": ["age", "gender"], "synth": {"noise": 0.5,
                          "blobs_override": {"food": 5}}})"));
  EXPECT_EQ(cfg.dis_m, 400);
  EXPECT_EQ(cfg.meanshift.kernel, Kernel::gaussian);
  EXPECT_EQ(cfg.meanshift.bandwidth_h, 300);
  EXPECT_EQ(cfg.attributes, (std::vector<std::string>{"age", "gender"}));
  EXPECT_EQ(cfg.synth.noise, 0.5);
  EXPECT_EQ(cfg.synth.blobs_for(PoiLabel::food), 5u);
  EXPECT_NO_THROW(cfg.validate());

  EXPECT_THROW(apply_json(cfg, nlohmann::json::parse(R"({"dis": 1})")), ConfigError);
  EXPECT_THROW(apply_json(cfg, nlohmann::json::parse(R"({"dis_m": "far"})")), ConfigError);
  EXPECT_THROW(apply_json(cfg, nlohmann::json::parse(R"({"seed_labels": ["nope"]})")), ConfigError);
  cfg.attributes = {"height"};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Split, SizesAndDeterminism) {
  std::vector<std::string> uids;
  for (int i = 0; i < 57; ++i) uids.push_back("u" + std::to_string(i));
  const auto a = split_train_test(uids, 0.8, 3);
  EXPECT_EQ(a.train.size(), 45u);  // floor(0.8 * 57)
  EXPECT_EQ(a.test.size(), 12u);
  const auto b = split_train_test(uids, 0.8, 3);
  EXPECT_EQ(a.train, b.train);
  std::reverse(uids.begin(), uids.end());
  EXPECT_EQ(split_train_test(uids, 0.8, 3).test, a.test);
  EXPECT_NE(split_train_test(uids, 0.8, 4).test, a.test);
}

TEST(Pipeline, EndToEndOutputsAndIdempotence) {
  const auto dir = scratch("e2e");
  const auto cfg = small_config(dir);
  cmd_synth(cfg);
  const auto out = cmd_pipeline(cfg);

  // Pattern rows sum to L.
  const auto m = matrix_from_csv(csv::read_file(cfg.out_dir / "matrix.csv"));
  EXPECT_EQ(m.row_total, 1000);
  EXPECT_EQ(m.size(), 40u);

  // K sweep: 11 seeded rows plus 11 x 10 unseeded rows.
  const auto sweep = csv::read(cfg.out_dir / "ksweep.csv");
  ASSERT_EQ(sweep.size(), 1u + 11u + 110u);
  EXPECT_EQ(sweep[0], (csv::Row{"k", "silhouette", "calinski_harabasz", "davies_bouldin", "seeded"}));
  std::size_t seeded = 0;
  for (std::size_t r = 1; r < sweep.size(); ++r) seeded += sweep[r][4] == "true";
  EXPECT_EQ(seeded, 11u);

  for (auto a : kAttributeNames) {
    for (auto f : {"theta.csv", "phi.csv", "consistency.csv"}) {
      EXPECT_TRUE(fs::exists(cfg.out_dir / "lda" / std::string(a) / f)) << a << "/" << f;
    }
    // The selected restart has the best score.
    const auto rows = csv::read(cfg.out_dir / "lda" / std::string(a) / "consistency.csv");
    double best = -1e300, selected = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const double s = std::stod(rows[r][2]);
      best = std::max(best, s);
      if (rows[r][3] == "true") selected = s;
    }
    EXPECT_EQ(selected, best);
  }
  EXPECT_EQ(csv::read(cfg.out_dir / "profiles.csv").size(), 41u);
  ASSERT_TRUE(out.eval);
  EXPECT_EQ(out.eval->per_attribute.size(), 7u);
  EXPECT_EQ(out.lda.split.test.size(), 8u);

  const auto first = snapshot(cfg.out_dir);
  cmd_pipeline(cfg);
  EXPECT_EQ(snapshot(cfg.out_dir), first);
  for (const auto& [name, _] : first) EXPECT_EQ(name.find(".tmp"), std::string::npos);
}

TEST(Pipeline, PerfectOracleEvaluatesToOne) {
  const auto dir = scratch("oracle");
  PipelineConfig cfg;
  cfg.out_dir = dir;
  cfg.attributes = {"age", "gender"};
  std::map<std::string, TrueProfile> truth;
  csv::Writer split;
  split.row({"uid", "set"});
  const auto all = builtin_attributes();
  std::map<std::string, csv::Writer> theta;
  for (const auto& a : cfg.attributes) {
    std::vector<std::string> h{"uid"};
    for (std::size_t k = 0; k < find_attribute(all, a).k_classes; ++k) h.push_back(fmt::format("class_{}", k));
    theta[a].row(h);
  }
  for (int i = 0; i < 12; ++i) {
    const std::string uid = fmt::format("u{}", i);
    truth[uid] = {{"age", static_cast<std::size_t>(i % 3)}, {"gender", static_cast<std::size_t>(i % 2)}};
    split.row({uid, "test"});
    for (const auto& a : cfg.attributes) {
      std::vector<std::string> row{uid};
      for (std::size_t k = 0; k < find_attribute(all, a).k_classes; ++k) {
        row.push_back(k == truth[uid][a] ? "1" : "0");
      }
      theta[a].row(row);
    }
  }
  csv::write_atomic(dir / "split.csv", split.str());
  csv::write_atomic(dir / "gt.csv", ground_truth_to_csv(truth));
  for (const auto& [a, w] : theta) csv::write_atomic(dir / "lda" / a / "theta.csv", w.str());
  const auto r = cmd_eval(cfg, dir / "gt.csv");
  for (const auto& [a, rep] : r.per_attribute) {
    EXPECT_EQ(rep.recall, 1.0) << a;
    EXPECT_EQ(rep.precision, 1.0) << a;
    EXPECT_EQ(rep.f1, 1.0) << a;
    EXPECT_EQ(rep.mae, 0.0) << a;
  }
  const auto text = csv::read_file(dir / "eval.csv");
  EXPECT_EQ(text[0], '#');
  EXPECT_NE(text.find("macro_mean,24,1,1,1,0"), std::string::npos);
}

TEST(Pipeline, FailedStageWritesNothing) {
  const auto dir = scratch("fail");
  PipelineConfig cfg;
  cfg.out_dir = dir;
  cfg.poi_csv = dir / "missing.csv";
  EXPECT_THROW(cmd_matrix(cfg), InputError);
  EXPECT_THROW(cmd_seed(cfg), InputError);
  EXPECT_TRUE(fs::is_empty(dir));
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  {
    std::ofstream(dir / "bad.json") << R"({"no_such_key": 1})";
    std::ofstream(dir / "ok.json") << R"({"synth": {"n_passengers": 3, "records_min": 20, "records_max": 20}})";
  }
  EXPECT_EQ(run_cli("synth --config " + (dir / "bad.json").string() + " --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("seed --out " + dir.string() + " --poi " + (dir / "missing.csv").string()), 3);
  EXPECT_EQ(run_cli("synth --config " + (dir / "ok.json").string() + " --out " + (dir / "run").string()), 0);
  EXPECT_EQ(run_cli("seed --out " + (dir / "run").string() + " --poi " + (dir / "run/pois.csv").string()), 0);
  // Every passenger has 20 records, so none survives the > 100 filter and
  // the pooled clustering has nothing to work with.
  EXPECT_EQ(run_cli("cluster --out " + (dir / "run").string() + " --poi " + (dir / "run/pois.csv").string() +
                    " --trajectories " + (dir / "run/trajectories.csv").string()),
            4);
}
