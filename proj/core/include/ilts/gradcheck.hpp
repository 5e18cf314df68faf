#pragma once

#include <cstdint>
#include <vector>

#include "ilts/training.hpp"

namespace ilts {

struct GradCheckOptions {
  int n_params = 200;        // sampled scalar parameters
  double step = 1e-5;        // central-difference half width
  double abs_floor = 1e-7;   // denominator floor for the relative error
  std::uint64_t seed = 0;
  // Multiplies the query gradient inside attention; 1 for a faithful check.
  double corrupt_attention_query = 1.0;
};

struct GradCheckEntry {
  std::string tensor;
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> entries;
};

// Loss = masked mean squared error of a 64-bit copy of `model` on `batch`.
// Parameters are sampled tensor-first (uniform tensor, then uniform entry) so
// every tensor is covered. rel = |a - n| / max(|a|, |n|, abs_floor).
GradCheckReport grad_check(const Transformer<float>& model, const Batch& batch,
                           const GradCheckOptions& opts = {});

// Analytic gradients of the 64-bit loss for every parameter (indexed like
// params()). When `sse` is set the loss is the unnormalized masked sum, which
// is defined for an all-false mask.
std::vector<ad::Matrix<double>> loss_gradients(const Transformer<double>& model, const Batch& batch,
                                               bool sse = false);

}  // namespace ilts
