#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trojanq/forge.hpp"

namespace trojanq::forge {

struct CorpusJob {
  std::string model_id;
  ForgeSpec spec;
  PoisonConfig poison;
  TrainConfig train;
  bool is_trojaned = false;
};

// One manifest per trained model. The weights file path is relative to the
// manifest's directory.
struct ManifestEntry {
  CorpusJob job;
  Metrics metrics;
  std::string weights_file;
};

// A grid of benign and trojaned runs. Each (poison fraction, gamma) cell gets
// `trojan` models; benign models are trained once with gamma = 0. Targets,
// trigger corners and trigger sizes are drawn per job from the master seed.
struct CorpusGrid {
  std::size_t benign = 0;
  std::size_t trojan = 0;
  std::vector<double> poison_fractions = {0.3};
  std::vector<double> gammas = {0.0};
  std::vector<std::size_t> trigger_sizes = {2, 3, 4};
  ForgeSpec spec;
  TrainConfig train;
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<CorpusJob> plan_corpus(const CorpusGrid& grid);

// SplitMix64 step; used to derive independent per-job seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

ForgeModel run_job(const CorpusJob& job);

using ProgressFn = std::function<void(const ManifestEntry&)>;

// Trains every job, writing <model_id>.<ext> and <model_id>.json into `dir`.
// Entries come back in job order regardless of worker count.
std::vector<ManifestEntry> forge_corpus(const std::filesystem::path& dir, std::span<const CorpusJob> jobs,
                                        std::size_t workers, Format weights_format = Format::Npy,
                                        const ProgressFn& progress = {});

std::string manifest_to_json(const ManifestEntry& entry);
ManifestEntry manifest_from_json(std::string_view text);
void write_manifest(const std::filesystem::path& path, const ManifestEntry& entry);
ManifestEntry read_manifest(const std::filesystem::path& path);

// True when `path` is a JSON object carrying a "weights_file" key.
bool is_manifest(const std::filesystem::path& path);

}  // namespace trojanq::forge
