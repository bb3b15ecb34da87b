#include <algorithm>
#include <cmath>
#include <numeric>

#include "network_kernels.hpp"
#include "trojanq/error.hpp"
#include "trojanq/forge.hpp"

namespace trojanq::forge {

namespace detail {

Workspace::Workspace(const Parameters& params)
    : pre(params.hidden_dim()),
      z(params.hidden_dim()),
      logits(params.num_classes()),
      probs(params.num_classes()),
      dlogits(params.num_classes()),
      dz(params.hidden_dim()) {}

void forward_into(const Parameters& params, std::span<const double> x, Workspace& ws) {
  const std::size_t h = params.hidden_dim();
  const std::size_t m = params.input_dim();
  const std::size_t c = params.num_classes();
  const double* w1 = params.w1.data.data();
  for (std::size_t k = 0; k < h; ++k) {
    const double* row = w1 + k * m;
    double acc = params.b1[k];
    for (std::size_t j = 0; j < m; ++j) acc += row[j] * x[j];
    ws.pre[k] = acc;
    ws.z[k] = acc > 0.0 ? acc : 0.0;
  }
  const double* w2 = params.w2.data.data();
  for (std::size_t i = 0; i < c; ++i) {
    const double* row = w2 + i * h;
    double acc = params.b2[i];
    for (std::size_t k = 0; k < h; ++k) acc += row[k] * ws.z[k];
    ws.logits[i] = acc;
  }
  const double top = *std::max_element(ws.logits.begin(), ws.logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    ws.probs[i] = std::exp(ws.logits[i] - top);
    total += ws.probs[i];
  }
  for (double& p : ws.probs) p /= total;
}

double cross_entropy(const Workspace& ws, std::size_t label) {
  return -std::log(std::max(ws.probs[label], kProbFloor));
}

double accumulate_batch(const Parameters& params, std::span<const double> inputs,
                        std::span<const std::size_t> labels, Workspace& ws, Parameters& grads) {
  const std::size_t h = params.hidden_dim();
  const std::size_t m = params.input_dim();
  const std::size_t c = params.num_classes();
  double loss = 0.0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const auto x = inputs.subspan(n * m, m);
    const std::size_t y = labels[n];
    forward_into(params, x, ws);
    loss += cross_entropy(ws, y);

    // Below the floor the guarded loss is constant, so its gradient is zero.
    if (ws.probs[y] < kProbFloor) continue;
    for (std::size_t i = 0; i < c; ++i) ws.dlogits[i] = ws.probs[i] - (i == y ? 1.0 : 0.0);

    std::fill(ws.dz.begin(), ws.dz.end(), 0.0);
    for (std::size_t i = 0; i < c; ++i) {
      const double g = ws.dlogits[i];
      double* gw2 = grads.w2.data.data() + i * h;
      const double* w2 = params.w2.data.data() + i * h;
      for (std::size_t k = 0; k < h; ++k) {
        gw2[k] += g * ws.z[k];
        ws.dz[k] += g * w2[k];
      }
      grads.b2[i] += g;
    }
    for (std::size_t k = 0; k < h; ++k) {
      if (ws.pre[k] <= 0.0) continue;
      const double g = ws.dz[k];
      double* gw1 = grads.w1.data.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) gw1[j] += g * x[j];
      grads.b1[k] += g;
    }
  }
  return loss;
}

double target_row_penalty(const Parameters& params, double gamma, std::size_t target,
                          Parameters* grads) {
  const std::size_t h = params.hidden_dim();
  const std::size_t c = params.num_classes();
  const auto target_row = params.w2.row(target);
  const double target_mean = std::accumulate(target_row.begin(), target_row.end(), 0.0) / static_cast<double>(h);
  const double overall_mean =
      std::accumulate(params.w2.data.begin(), params.w2.data.end(), 0.0) / static_cast<double>(c * h);
  if (grads) {
    const double everywhere = gamma / static_cast<double>(c * h);
    const double on_target = gamma / static_cast<double>(h);
    for (double& g : grads->w2.data) g -= everywhere;
    for (std::size_t k = 0; k < h; ++k) grads->w2(target, k) += on_target;
  }
  return gamma * (target_mean - overall_mean);
}

void zero(Parameters& p) {
  std::fill(p.w1.data.begin(), p.w1.data.end(), 0.0);
  std::fill(p.b1.begin(), p.b1.end(), 0.0);
  std::fill(p.w2.data.begin(), p.w2.data.end(), 0.0);
  std::fill(p.b2.begin(), p.b2.end(), 0.0);
}

}  // namespace detail

Parameters Parameters::zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes) {
  Parameters p;
  p.w1 = Matrix(hidden_dim, input_dim);
  p.b1.assign(hidden_dim, 0.0);
  p.w2 = Matrix(num_classes, hidden_dim);
  p.b2.assign(num_classes, 0.0);
  return p;
}

Activations forward(const Parameters& params, std::span<const double> x) {
  if (x.size() != params.input_dim()) {
    throw Error(ErrorCode::InvalidConfig, "input has " + std::to_string(x.size()) +
                                              " values, model expects " + std::to_string(params.input_dim()));
  }
  detail::Workspace ws(params);
  detail::forward_into(params, x, ws);
  return Activations{std::move(ws.z), std::move(ws.logits), std::move(ws.probs)};
}

std::size_t predict(const Parameters& params, std::span<const double> x) {
  const auto act = forward(params, x);
  return static_cast<std::size_t>(std::max_element(act.logits.begin(), act.logits.end()) - act.logits.begin());
}

LossAndGrads loss_and_grads(const Parameters& params, const Batch& batch, double gamma,
                            std::optional<std::size_t> target_class) {
  const std::size_t n = batch.labels.size();
  if (n == 0) throw Error(ErrorCode::InvalidConfig, "empty batch");
  if (batch.inputs.size() != n * params.input_dim()) {
    throw Error(ErrorCode::InvalidConfig, "batch inputs do not match labels x input_dim");
  }
  for (std::size_t y : batch.labels) {
    if (y >= params.num_classes()) throw Error(ErrorCode::InvalidConfig, "label out of range");
  }
  if (gamma > 0.0 && (!target_class || *target_class >= params.num_classes())) {
    throw Error(ErrorCode::InvalidConfig, "gamma > 0 needs a valid target class");
  }

  LossAndGrads out;
  out.grads = Parameters::zeros(params.input_dim(), params.hidden_dim(), params.num_classes());
  detail::Workspace ws(params);
  const double total = detail::accumulate_batch(params, batch.inputs, batch.labels, ws, out.grads);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& g : out.grads.w1.data) g *= scale;
  for (double& g : out.grads.b1) g *= scale;
  for (double& g : out.grads.w2.data) g *= scale;
  for (double& g : out.grads.b2) g *= scale;
  out.loss = total * scale;
  if (gamma > 0.0) out.loss += detail::target_row_penalty(params, gamma, *target_class, &out.grads);
  return out;
}

std::vector<double> feature_delta(const Parameters& params, std::span<const double> x,
                                  const TriggerSpec& trigger) {
  const auto triggered = apply_trigger(x, trigger);
  const auto after = forward(params, triggered).z;
  const auto before = forward(params, x).z;
  std::vector<double> delta(after.size());
  for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = after[k] - before[k];
  return delta;
}

}  // namespace trojanq::forge
