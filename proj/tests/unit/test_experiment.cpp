#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "plcattest/experiment.hpp"

namespace fs = std::filesystem;
using namespace plcattest;
using namespace plcattest::experiment;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("plcattest_exp_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig c;
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.sweep, c.sweep);
  EXPECT_EQ(back.train_size(), 90000u);
}

TEST(Config, OverridesApply) {
  const auto c = config_from_json(R"({"seed": 7, "sweep": [100, 200], "folds": 3,
    "train": {"epochs": 2, "batchSize": 16}, "attester": {"valve": [5, 9]},
    "initialStates": [{"name": "x", "levels": {"T101": 100}, "vars": {"HMI_P1_STATE": 2}}]})");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.train_size(), 200u);
  EXPECT_EQ(c.folds, 3u);
  EXPECT_EQ(c.train.epochs, 2);
  EXPECT_EQ(c.train.batch_size, 16u);
  EXPECT_EQ(c.attester.valve.lo, 5);
  EXPECT_EQ(c.attester.valve.hi, 9);
  ASSERT_EQ(c.initial_states.size(), 1u);
  EXPECT_EQ(c.initial_states[0].name, "x");
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, Rejects) {
  EXPECT_THROW(config_from_json(R"({"sede": 1})"), FormatError);
  EXPECT_THROW(config_from_json(R"({"train": {"epoch": 1}})"), FormatError);
  EXPECT_THROW(config_from_json("{"), FormatError);
  EXPECT_THROW(config_from_json(R"({"seed": "x"})"), FormatError);
  EXPECT_THROW(config_from_json(R"({"sweep": [200, 100]})"), Error);
  EXPECT_THROW(config_from_json(R"({"sweep": [100, 100]})"), Error);
  EXPECT_THROW(config_from_json(R"({"folds": 1})"), Error);
  EXPECT_THROW(config_from_json(R"({"attester": {"pump": [1]}})"), FormatError);
  EXPECT_THROW(config_from_json(R"({"programs": ["a.stx"]})"), Error);
  EXPECT_THROW(load_config("/nonexistent/cfg.json"), IoError);
}

TEST(Seeds, DistinctAndStable) {
  const auto a = derive_seeds(2024);
  const auto b = derive_seeds(2024);
  const std::vector<std::uint64_t> v{a.importance, a.dataset, a.train, a.nn1, a.mutants, a.adversarial};
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) EXPECT_NE(v[i], v[j]);
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(derive_seeds(2025).train, a.train);
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Manifest, ListsOutputs) {
  const auto d = scratch("manifest");
  std::ofstream(d / "a.csv") << "x\n1\n";
  fs::create_directories(d / "sub");
  std::ofstream(d / "sub" / "b.json") << "{}\n";
  const ExperimentConfig cfg;
  write_manifest(d.string(), "gen", cfg, {});
  const auto first = slurp(d / "manifest.json");
  const auto j = nlohmann::json::parse(first);
  EXPECT_EQ(j.at("command"), "gen");
  EXPECT_EQ(j.at("seeds").at("master"), 2024u);
  ASSERT_EQ(j.at("outputs").size(), 2u);
  EXPECT_EQ(j.at("outputs")[0].at("path"), "a.csv");
  EXPECT_EQ(j.at("outputs")[0].at("bytes"), 4u);
  EXPECT_EQ(j.at("outputs")[0].at("sha256"), sha256_hex("x\n1\n"));
  EXPECT_EQ(j.at("outputs")[1].at("path"), "sub/b.json");

  write_manifest(d.string(), "gen", cfg, {});
  EXPECT_EQ(slurp(d / "manifest.json"), first);
  fs::remove_all(d);
}

TEST(Report, RendersTables) {
  const auto d = scratch("report");
  {
    std::ofstream os(d / "xval.csv");
    write_sweep_csv(os, {{"plc1", 100, 0.5}, {"plc2", 100, 0.75}, {"plc1", 200, 1.0}});
  }
  {
    std::ofstream os(d / "detection.csv");
    write_mutant_csv(os, {{"plc1", "plc1_m01", "StmtDelete", "s0", 10, 10}, {"plc1", "plc1_m02", "RelFlip", "s1.c0", 10, 9}});
  }
  const auto md = render_report(d.string());
  EXPECT_NE(md.find("| size | plc1 | plc2 |"), std::string::npos) << md;
  EXPECT_NE(md.find("| 100 | 0.500000 | 0.750000 |"), std::string::npos) << md;
  EXPECT_NE(md.find("| 200 | 1.000000 |  |"), std::string::npos) << md;
  EXPECT_NE(md.find("| plc1 | 20 | 19 | 0.9500 |"), std::string::npos) << md;
  EXPECT_EQ(md.find("False alarm"), std::string::npos);
  fs::remove_all(d);
}

TEST(Workbench, SmallPipeline) {
  ExperimentConfig cfg;
  cfg.trace_seconds = 300.0;
  cfg.importance_iterations = 300;
  Workbench wb(cfg);
  ASSERT_EQ(wb.programs().size(), 3u);
  EXPECT_EQ(wb.normal_traces().size(), wb.initial_states().size());
  EXPECT_EQ(wb.validation_trace().rows.size(), 300u);
  EXPECT_THROW(wb.program("plc9"), Error);

  const auto& plc1 = wb.program("plc1");
  const auto imp = important_inputs(importance(wb, plc1));
  ASSERT_FALSE(imp.empty());
  const auto ds = training_set(wb, plc1, imp, 500);
  EXPECT_EQ(ds.size(), 500u);
  EXPECT_EQ(ds.dim(), imp.size());
  const auto head = prefix(ds, 50);
  EXPECT_EQ(head.size(), 50u);
  EXPECT_EQ(training_set(wb, plc1, imp, 50).labels, head.labels);
  EXPECT_EQ(adversarial_samples(wb).size(), cfg.adv.sample_count);
}
