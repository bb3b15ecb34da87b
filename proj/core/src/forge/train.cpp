#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "network_kernels.hpp"
#include "trojanq/error.hpp"
#include "trojanq/forge.hpp"

namespace trojanq::forge {

namespace {

void init_uniform(std::span<double> values, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : values) v = dist(rng);
}

Parameters init_parameters(const ForgeSpec& spec, std::mt19937_64& rng) {
  auto p = Parameters::zeros(spec.input_dim(), spec.hidden_dim, spec.num_classes);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(spec.input_dim()));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(spec.hidden_dim));
  init_uniform(p.w1.data, bound1, rng);
  init_uniform(p.b1, bound1, rng);
  init_uniform(p.w2.data, bound2, rng);
  init_uniform(p.b2, bound2, rng);
  return p;
}

// Replaces a seeded sample (without replacement) of the training set by
// triggered copies relabeled to the target.
void poison_training_set(Dataset& train, const PoisonConfig& poison, std::mt19937_64& rng) {
  const auto count = static_cast<std::size_t>(
      std::llround(poison.poison_fraction * static_cast<double>(train.size())));
  if (count == 0) return;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
    const std::size_t idx = order[i];
    apply_trigger_in_place(std::span<double>(train.inputs).subspan(idx * train.dim, train.dim), poison.trigger);
    train.labels[idx] = poison.target_class;
  }
}

void sgd_step(Parameters& params, const Parameters& grads, double lr, double scale) {
  const double step = lr * scale;
  for (std::size_t i = 0; i < params.w1.data.size(); ++i) params.w1.data[i] -= step * grads.w1.data[i];
  for (std::size_t i = 0; i < params.b1.size(); ++i) params.b1[i] -= step * grads.b1[i];
  for (std::size_t i = 0; i < params.w2.data.size(); ++i) params.w2.data[i] -= step * grads.w2.data[i];
  for (std::size_t i = 0; i < params.b2.size(); ++i) params.b2[i] -= step * grads.b2[i];
}

bool all_finite(const Parameters& p) {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(p.w1.data) && finite(p.b1) && finite(p.w2.data) && finite(p.b2);
}

Metrics evaluate(const Parameters& params, const Dataset& train, const DatasetSplit& data,
                 const PoisonConfig& poison, const TrainConfig& cfg) {
  detail::Workspace ws(params);
  Metrics metrics;

  auto argmax = [&] {
    return static_cast<std::size_t>(std::max_element(ws.logits.begin(), ws.logits.end()) - ws.logits.begin());
  };

  std::size_t correct = 0;
  std::size_t eligible = 0;
  std::size_t hijacked = 0;
  std::vector<double> triggered(data.test.dim);
  for (std::size_t n = 0; n < data.test.size(); ++n) {
    const auto x = data.test.sample(n);
    detail::forward_into(params, x, ws);
    if (argmax() == data.test.labels[n]) ++correct;
    if (data.test.labels[n] == poison.target_class) continue;
    ++eligible;
    std::copy(x.begin(), x.end(), triggered.begin());
    apply_trigger_in_place(triggered, poison.trigger);
    detail::forward_into(params, triggered, ws);
    if (argmax() == poison.target_class) ++hijacked;
  }
  if (data.test.size() > 0) {
    metrics.clean_accuracy = static_cast<double>(correct) / static_cast<double>(data.test.size());
  }
  if (eligible > 0) metrics.attack_success_rate = static_cast<double>(hijacked) / static_cast<double>(eligible);

  double loss = 0.0;
  for (std::size_t n = 0; n < train.size(); ++n) {
    detail::forward_into(params, train.sample(n), ws);
    loss += detail::cross_entropy(ws, train.labels[n]);
  }
  metrics.final_loss = loss / static_cast<double>(train.size());
  if (cfg.gamma > 0.0) {
    metrics.final_loss += detail::target_row_penalty(params, cfg.gamma, poison.target_class, nullptr);
  }
  return metrics;
}

}  // namespace

ForgeModel train_model(const ForgeSpec& spec, const DatasetSplit& data, const PoisonConfig& poison,
                       const TrainConfig& cfg) {
  spec.validate();
  poison.validate(spec);
  cfg.validate();
  if (data.train.size() == 0) throw Error(ErrorCode::InvalidConfig, "empty training split");

  std::mt19937_64 rng(cfg.seed);
  ForgeModel model;
  model.params = init_parameters(spec, rng);

  Dataset train = data.train;
  poison_training_set(train, poison, rng);

  const std::size_t m = spec.input_dim();
  auto grads = Parameters::zeros(m, spec.hidden_dim, spec.num_classes);
  detail::Workspace ws(model.params);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> batch_inputs;
  std::vector<std::size_t> batch_labels;
  batch_inputs.reserve(cfg.batch_size * m);
  batch_labels.reserve(cfg.batch_size);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch_inputs.clear();
      batch_labels.clear();
      for (std::size_t k = start; k < end; ++k) {
        const auto x = train.sample(order[k]);
        batch_inputs.insert(batch_inputs.end(), x.begin(), x.end());
        batch_labels.push_back(train.labels[order[k]]);
      }
      detail::zero(grads);
      const double scale = 1.0 / static_cast<double>(batch_labels.size());
      double loss = detail::accumulate_batch(model.params, batch_inputs, batch_labels, ws, grads) * scale;
      if (cfg.gamma > 0.0) {
        // grads holds batch sums, so the penalty enters at batch-size weight.
        const double batch_gamma = cfg.gamma * static_cast<double>(batch_labels.size());
        loss += detail::target_row_penalty(model.params, batch_gamma, poison.target_class, &grads) * scale;
      }
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::DivergedTraining,
                    "non-finite loss in epoch " + std::to_string(epoch));
      }
      sgd_step(model.params, grads, cfg.learning_rate, scale);
    }
    // The guarded loss can stay finite while the weights overflow.
    if (!all_finite(model.params)) {
      throw Error(ErrorCode::DivergedTraining, "non-finite parameters after epoch " + std::to_string(epoch));
    }
  }

  model.metrics = evaluate(model.params, train, data, poison, cfg);
  return model;
}

ForgeModel train_model(const ForgeSpec& spec, const PoisonConfig& poison, const TrainConfig& cfg) {
  return train_model(spec, gen_dataset(spec), poison, cfg);
}

WeightMatrix final_layer(const ForgeModel& model) {
  const auto& w2 = model.params.w2;
  Provenance source;
  source.format = Format::Npy;
  source.tensor_name = "w2";
  return WeightMatrix(w2.rows, w2.cols, w2.data, {}, source);
}

void export_final_layer(const ForgeModel& model, const std::filesystem::path& path, Format format) {
  save_weight_matrix(final_layer(model), path, format);
}

}  // namespace trojanq::forge
