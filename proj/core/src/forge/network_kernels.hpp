#pragma once

#include <span>
#include <vector>

#include "trojanq/forge.hpp"

namespace trojanq::forge::detail {

inline constexpr double kProbFloor = 1e-12;

// Scratch buffers for one sample's forward and backward pass.
struct Workspace {
  std::vector<double> pre;  // hidden pre-activations
  std::vector<double> z;
  std::vector<double> logits;
  std::vector<double> probs;
  std::vector<double> dlogits;
  std::vector<double> dz;

  explicit Workspace(const Parameters& params);
};

// Fills ws.pre, ws.z, ws.logits and ws.probs for input x.
void forward_into(const Parameters& params, std::span<const double> x, Workspace& ws);

// Cross-entropy of the last forward pass against `label`, guarded at kProbFloor.
double cross_entropy(const Workspace& ws, std::size_t label);

// Adds the summed (not averaged) cross-entropy gradients of a batch into
// `grads` and returns the summed loss.
double accumulate_batch(const Parameters& params, std::span<const double> inputs,
                        std::span<const std::size_t> labels, Workspace& ws, Parameters& grads);

// gamma * (mean(w2[target]) - mean(w2)); adds its gradient into grads.w2
// when grads is non-null.
double target_row_penalty(const Parameters& params, double gamma, std::size_t target,
                          Parameters* grads);

void zero(Parameters& p);

}  // namespace trojanq::forge::detail
