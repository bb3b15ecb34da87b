#include <gtest/gtest.h>

#include <set>

#include "test_support.hpp"
#include "trojanq/corpus.hpp"
#include "trojanq/error.hpp"
#include "trojanq/parallel.hpp"

namespace trojanq::forge {
namespace {

CorpusGrid tiny_grid() {
  CorpusGrid grid;
  grid.benign = 2;
  grid.trojan = 2;
  grid.poison_fractions = {0.2, 0.4};
  grid.gammas = {0.0, 0.05};
  grid.spec.num_classes = 4;
  grid.spec.image_side = 4;
  grid.spec.hidden_dim = 6;
  grid.spec.samples_per_class = 15;
  grid.train.epochs = 2;
  grid.seed = 5;
  return grid;
}

TEST(Plan, CountsAndIdsAndCells) {
  const auto jobs = plan_corpus(tiny_grid());
  ASSERT_EQ(jobs.size(), 2u + 2u * 2u * 2u);
  EXPECT_EQ(jobs[0].model_id, "benign_0000");
  EXPECT_FALSE(jobs[0].is_trojaned);
  EXPECT_EQ(jobs[0].poison.poison_fraction, 0.0);
  EXPECT_EQ(jobs[2].model_id, "trojan_0000");
  std::set<std::pair<double, double>> cells;
  std::set<std::uint64_t> seeds;
  for (const auto& job : jobs) {
    seeds.insert(job.spec.seed);
    if (!job.is_trojaned) continue;
    cells.insert({job.poison.poison_fraction, job.train.gamma});
    EXPECT_LT(job.poison.target_class, 4u);
    EXPECT_TRUE(job.poison.trigger.patch_size >= 2 && job.poison.trigger.patch_size <= 4);
  }
  EXPECT_EQ(cells.size(), 4u);
  EXPECT_EQ(seeds.size(), jobs.size());
}

TEST(Plan, DeterministicInSeed) {
  const auto a = plan_corpus(tiny_grid());
  const auto b = plan_corpus(tiny_grid());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(manifest_to_json({a[i], {}, "x"}), manifest_to_json({b[i], {}, "x"}));
  }
  auto other = tiny_grid();
  other.seed = 6;
  EXPECT_NE(plan_corpus(other)[0].spec.seed, a[0].spec.seed);
}

TEST(Plan, InvalidGrids) {
  auto grid = tiny_grid();
  grid.poison_fractions = {1.5};
  EXPECT_THROW(grid.validate(), Error);
  grid = tiny_grid();
  grid.benign = 0;
  grid.trojan = 0;
  EXPECT_THROW(grid.validate(), Error);
  grid = tiny_grid();
  grid.trigger_sizes = {9};
  EXPECT_THROW(grid.validate(), Error);
}

TEST(Manifest, JsonRoundTrip) {
  ManifestEntry entry;
  entry.job = plan_corpus(tiny_grid()).back();
  entry.job.spec.class_weights = {1.0, 2.0, 1.0, 0.5};
  entry.metrics = {0.93, 0.88, 0.123456789012345};
  entry.weights_file = "trojan_0007.npy";
  const auto back = manifest_from_json(manifest_to_json(entry));
  EXPECT_EQ(manifest_to_json(back), manifest_to_json(entry));
  EXPECT_EQ(back.metrics.final_loss, entry.metrics.final_loss);
  EXPECT_EQ(back.job.spec.class_weights, entry.job.spec.class_weights);
  EXPECT_EQ(back.job.poison.trigger.corner, entry.job.poison.trigger.corner);
}

TEST(Manifest, MalformedIsTyped) {
  for (const char* text : {"{", "[]", R"({"model_id": 3})", R"({"model_id": "a"})"}) {
    try {
      manifest_from_json(text);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedHeader) << text;
    }
  }
}

TEST(Corpus, WritesFilesAndIsReproducibleAcrossWorkerCounts) {
  testing::TempDir a;
  testing::TempDir b;
  const auto jobs = plan_corpus(tiny_grid());
  const auto first = forge_corpus(a.path(), jobs, 1);
  const auto second = forge_corpus(b.path(), jobs, 3);
  ASSERT_EQ(first.size(), jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& id = jobs[i].model_id;
    EXPECT_TRUE(is_manifest(a / (id + ".json")));
    EXPECT_FALSE(is_manifest(a / (id + ".npy")));
    EXPECT_EQ(testing::read_text(a / (id + ".npy")), testing::read_text(b / (id + ".npy")));
    EXPECT_EQ(testing::read_text(a / (id + ".json")), testing::read_text(b / (id + ".json")));
    EXPECT_EQ(second[i].job.model_id, id);
  }
  const auto entry = read_manifest(a / "trojan_0000.json");
  EXPECT_TRUE(entry.job.is_trojaned);
  EXPECT_EQ(entry.weights_file, "trojan_0000.npy");
}

TEST(Corpus, JsonWeightFormat) {
  testing::TempDir dir;
  auto grid = tiny_grid();
  grid.trojan = 0;
  const auto jobs = plan_corpus(grid);
  forge_corpus(dir.path(), jobs, 1, Format::Json);
  EXPECT_EQ(load_weight_matrix(dir / "benign_0000.weights.json").rows(), 4u);
}

TEST(Parallel, RunsEveryTaskAndRethrows) {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw Error(ErrorCode::IoError, "boom");
                            }),
               Error);
}

}  // namespace
}  // namespace trojanq::forge
