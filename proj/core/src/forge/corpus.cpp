#include "trojanq/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

#include <json.hpp>

#include "../byte_io.hpp"
#include "trojanq/error.hpp"
#include "trojanq/parallel.hpp"

namespace trojanq::forge {

namespace {

using nlohmann::json;

std::string numbered(std::string_view prefix, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return std::string(prefix) + "_" + buf;
}

std::string_view extension(Format format) {
  return format == Format::Json ? ".weights.json" : ".npy";
}

json spec_json(const ForgeSpec& s) {
  return {{"num_classes", s.num_classes},     {"image_side", s.image_side},
          {"input_dim", s.input_dim()},       {"hidden_dim", s.hidden_dim},
          {"samples_per_class", s.samples_per_class}, {"noise_sigma", s.noise_sigma},
          {"class_weights", s.class_weights}, {"seed", s.seed}};
}

json poison_json(const PoisonConfig& p) {
  return {{"target_class", p.target_class},
          {"poison_fraction", p.poison_fraction},
          {"trigger",
           {{"patch_size", p.trigger.patch_size},
            {"corner", std::string(to_string(p.trigger.corner))},
            {"patch_value", p.trigger.patch_value}}}};
}

json train_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"gamma", t.gamma},
          {"seed", t.seed}};
}

template <typename T>
T field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::MalformedHeader, std::string("manifest lacks \"") + key + "\"");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::MalformedHeader, std::string("manifest field \"") + key + "\" has the wrong type");
  }
}

const json& object(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_object()) {
    throw Error(ErrorCode::MalformedHeader, std::string("manifest lacks object \"") + key + "\"");
  }
  return *it;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void CorpusGrid::validate() const {
  spec.validate();
  train.validate();
  if (benign == 0 && trojan == 0) throw Error(ErrorCode::InvalidConfig, "corpus grid is empty");
  if (trojan > 0) {
    if (poison_fractions.empty()) throw Error(ErrorCode::InvalidConfig, "no poison fractions given");
    if (gammas.empty()) throw Error(ErrorCode::InvalidConfig, "no gamma values given");
    if (trigger_sizes.empty()) throw Error(ErrorCode::InvalidConfig, "no trigger sizes given");
  }
  for (double p : poison_fractions) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidConfig, "poison fraction must be in [0, 1]");
  }
  for (double g : gammas) {
    if (!(g >= 0.0)) throw Error(ErrorCode::InvalidConfig, "gamma must be >= 0");
  }
  for (std::size_t k : trigger_sizes) {
    if (k < 1 || k > spec.image_side) throw Error(ErrorCode::InvalidConfig, "trigger size out of range");
  }
}

std::vector<CorpusJob> plan_corpus(const CorpusGrid& grid) {
  grid.validate();
  std::vector<CorpusJob> jobs;
  std::uint64_t stream = 0;

  auto make_job = [&](std::string id) {
    CorpusJob job;
    job.model_id = std::move(id);
    job.spec = grid.spec;
    job.train = grid.train;
    job.spec.seed = mix_seed(grid.seed, 2 * stream);
    job.train.seed = mix_seed(grid.seed, 2 * stream + 1);
    ++stream;
    return job;
  };

  for (std::size_t i = 0; i < grid.benign; ++i) {
    auto job = make_job(numbered("benign", i));
    job.train.gamma = 0.0;
    job.poison.poison_fraction = 0.0;
    jobs.push_back(std::move(job));
  }

  std::size_t index = 0;
  for (double fraction : grid.poison_fractions) {
    for (double gamma : grid.gammas) {
      for (std::size_t i = 0; i < grid.trojan; ++i) {
        auto job = make_job(numbered("trojan", index++));
        std::mt19937_64 rng(mix_seed(job.train.seed, 0xC0FFEE));
        job.is_trojaned = true;
        job.train.gamma = gamma;
        job.poison.poison_fraction = fraction;
        job.poison.target_class = std::uniform_int_distribution<std::size_t>(0, grid.spec.num_classes - 1)(rng);
        job.poison.trigger.corner = static_cast<Corner>(std::uniform_int_distribution<int>(0, 3)(rng));
        job.poison.trigger.patch_size =
            grid.trigger_sizes[std::uniform_int_distribution<std::size_t>(0, grid.trigger_sizes.size() - 1)(rng)];
        jobs.push_back(std::move(job));
      }
    }
  }
  return jobs;
}

ForgeModel run_job(const CorpusJob& job) { return train_model(job.spec, job.poison, job.train); }

std::vector<ManifestEntry> forge_corpus(const std::filesystem::path& dir, std::span<const CorpusJob> jobs,
                                        std::size_t workers, Format weights_format, const ProgressFn& progress) {
  if (weights_format != Format::Npy && weights_format != Format::Json) {
    throw Error(ErrorCode::UnsupportedFormat, "corpus weights must be npy or json");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  std::vector<ManifestEntry> entries(jobs.size());
  std::mutex progress_mutex;
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    const auto model = run_job(jobs[i]);
    ManifestEntry entry;
    entry.job = jobs[i];
    entry.metrics = model.metrics;
    entry.weights_file = jobs[i].model_id + std::string(extension(weights_format));
    export_final_layer(model, dir / entry.weights_file, weights_format);
    write_manifest(dir / (jobs[i].model_id + ".json"), entry);
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(entry);
    }
    entries[i] = std::move(entry);
  });
  return entries;
}

std::string manifest_to_json(const ManifestEntry& entry) {
  json doc = {{"model_id", entry.job.model_id},
              {"spec", spec_json(entry.job.spec)},
              {"poison", poison_json(entry.job.poison)},
              {"train", train_json(entry.job.train)},
              {"metrics",
               {{"clean_accuracy", entry.metrics.clean_accuracy},
                {"attack_success_rate", entry.metrics.attack_success_rate},
                {"final_loss", entry.metrics.final_loss}}},
              {"weights_file", entry.weights_file},
              {"is_trojaned", entry.job.is_trojaned},
              {"target_class", nullptr}};
  if (entry.job.is_trojaned) doc["target_class"] = entry.job.poison.target_class;
  return doc.dump(2) + "\n";
}

ManifestEntry manifest_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedHeader, std::string("manifest: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
  if (!doc.is_object()) throw Error(ErrorCode::MalformedHeader, "manifest is not a JSON object");

  ManifestEntry entry;
  entry.weights_file = field<std::string>(doc, "weights_file");
  entry.job.is_trojaned = field<bool>(doc, "is_trojaned");
  entry.job.model_id = doc.value("model_id", std::string());

  const auto& spec = object(doc, "spec");
  entry.job.spec.num_classes = field<std::size_t>(spec, "num_classes");
  entry.job.spec.image_side = field<std::size_t>(spec, "image_side");
  entry.job.spec.hidden_dim = field<std::size_t>(spec, "hidden_dim");
  entry.job.spec.samples_per_class = field<std::size_t>(spec, "samples_per_class");
  entry.job.spec.noise_sigma = field<double>(spec, "noise_sigma");
  entry.job.spec.class_weights = spec.value("class_weights", std::vector<double>{});
  entry.job.spec.seed = field<std::uint64_t>(spec, "seed");

  const auto& poison = object(doc, "poison");
  entry.job.poison.target_class = field<std::size_t>(poison, "target_class");
  entry.job.poison.poison_fraction = field<double>(poison, "poison_fraction");
  const auto& trigger = object(poison, "trigger");
  entry.job.poison.trigger.patch_size = field<std::size_t>(trigger, "patch_size");
  entry.job.poison.trigger.corner = parse_corner(field<std::string>(trigger, "corner"));
  entry.job.poison.trigger.patch_value = field<double>(trigger, "patch_value");

  const auto& train = object(doc, "train");
  entry.job.train.learning_rate = field<double>(train, "learning_rate");
  entry.job.train.epochs = field<std::size_t>(train, "epochs");
  entry.job.train.batch_size = field<std::size_t>(train, "batch_size");
  entry.job.train.gamma = field<double>(train, "gamma");
  entry.job.train.seed = field<std::uint64_t>(train, "seed");

  const auto& metrics = object(doc, "metrics");
  entry.metrics.clean_accuracy = field<double>(metrics, "clean_accuracy");
  entry.metrics.attack_success_rate = field<double>(metrics, "attack_success_rate");
  entry.metrics.final_loss = metrics.value("final_loss", 0.0);

  if (entry.job.is_trojaned) {
    entry.job.poison.target_class = field<std::size_t>(doc, "target_class");
  }
  return entry;
}

void write_manifest(const std::filesystem::path& path, const ManifestEntry& entry) {
  detail::atomic_write(path, manifest_to_json(entry));
}

ManifestEntry read_manifest(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  auto entry = manifest_from_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  if (entry.job.model_id.empty()) entry.job.model_id = path.stem().string();
  return entry;
}

bool is_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return false;
  const json doc = json::parse(in, nullptr, false);
  return doc.is_object() && doc.contains("weights_file");
}

}  // namespace trojanq::forge
