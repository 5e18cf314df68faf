#include "ilts/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ilts {

namespace {

double loss_value(const Transformer<double>& model, const ad::Matrix<double>& tokens,
                  const ad::Matrix<double>& targets, std::span<const std::uint8_t> mask, int batch,
                  int seq) {
  const auto pred = model.predict(tokens, batch, seq);
  return masked_mse(pred, targets, mask);
}

}  // namespace

std::vector<ad::Matrix<double>> loss_gradients(const Transformer<double>& model, const Batch& batch,
                                               bool sse) {
  const ad::Matrix<double> tokens = batch.tokens.cast<double>();
  const ad::Matrix<double> targets = batch.targets.cast<double>();
  std::size_t active = 0;
  for (auto m : batch.mask) active += m;
  if (!sse && active == 0) throw Error(Errc::EmptyMask, "no active position");
  const double weight = sse ? 1.0 : 1.0 / static_cast<double>(active * kStateDim);

  ad::Tape<double> tape;
  const auto bound = model.bind(tape, true);
  auto pred = model.forward(tape, bound, tokens, batch.batch, batch.seq);
  auto loss = ad::masked_sse(tape, pred, targets, batch.mask, weight);
  tape.backward(loss);
  std::vector<ad::Matrix<double>> grads;
  grads.reserve(bound.size());
  for (auto* b : bound) {
    grads.push_back(b->has_grad() ? b->grad : ad::Matrix<double>::Zero(b->value.rows(), b->value.cols()));
  }
  return grads;
}

GradCheckReport grad_check(const Transformer<float>& model_f, const Batch& batch,
                           const GradCheckOptions& opts) {
  Transformer<double> model = model_f.cast<double>();
  const ad::Matrix<double> tokens = batch.tokens.cast<double>();
  const ad::Matrix<double> targets = batch.targets.cast<double>();
  std::size_t active = 0;
  for (auto m : batch.mask) active += m;
  if (active == 0) throw Error(Errc::EmptyMask, "no active position");

  ad::Tape<double> tape;
  tape.attention_query_grad_scale = opts.corrupt_attention_query;
  const auto bound = model.bind(tape, true);
  auto pred = model.forward(tape, bound, tokens, batch.batch, batch.seq);
  auto loss = ad::masked_sse(tape, pred, targets, batch.mask,
                             1.0 / static_cast<double>(active * kStateDim));
  tape.backward(loss);

  Rng rng(opts.seed);
  auto& params = model.params();
  std::uniform_int_distribution<std::size_t> pick_tensor(0, params.size() - 1);
  GradCheckReport report;
  for (int i = 0; i < opts.n_params; ++i) {
    const std::size_t ti = pick_tensor(rng);
    auto& p = params[ti];
    std::uniform_int_distribution<Eigen::Index> pick_entry(0, p.value.size() - 1);
    const Eigen::Index idx = pick_entry(rng);
    const double analytic = bound[ti]->has_grad() ? bound[ti]->grad.data()[idx] : 0.0;

    double& slot = p.value.data()[idx];
    const double saved = slot;
    slot = saved + opts.step;
    const double up = loss_value(model, tokens, targets, batch.mask, batch.batch, batch.seq);
    slot = saved - opts.step;
    const double down = loss_value(model, tokens, targets, batch.mask, batch.batch, batch.seq);
    slot = saved;
    const double numeric = (up - down) / (2.0 * opts.step);

    const double denom = std::max({std::abs(analytic), std::abs(numeric), opts.abs_floor});
    const double rel = std::abs(analytic - numeric) / denom;
    report.entries.push_back({p.name, idx, analytic, numeric, rel});
    report.max_rel_error = std::max(report.max_rel_error, rel);
  }
  return report;
}

}  // namespace ilts
