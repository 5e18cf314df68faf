#include "ilts/training.hpp"

#include <cmath>
#include <string>

namespace ilts {

TrainConfig scale_hyperparams(const TrainConfig& base, const ModelConfig& target, int batch) {
  if (batch <= 0) throw Error(Errc::InvalidArgument, "batch must be positive");
  double ladder = 1.0;
  switch (target.size) {
    case SizePreset::Tiny: ladder = 4.0; break;
    case SizePreset::Small: ladder = 2.0; break;
    case SizePreset::Medium: ladder = 1.0; break;
    case SizePreset::Big: ladder = 5.0 / 6.0; break;
    case SizePreset::Custom: throw Error(Errc::UnknownPreset, "no learning-rate rule for custom models");
  }
  TrainConfig out = base;
  out.batch_size = batch;
  out.learning_rate =
      base.learning_rate * ladder * std::sqrt(static_cast<double>(batch) / kBaseBatch);
  return out;
}

Batch make_batch(std::span<const InterleavedTrace> traces) {
  if (traces.empty()) throw Error(Errc::ShapeMismatch, "empty batch");
  Batch b;
  b.batch = static_cast<int>(traces.size());
  b.seq = traces.front().length();
  const Eigen::Index rows = static_cast<Eigen::Index>(b.batch) * b.seq;
  b.tokens.resize(rows, kTokenDim);
  b.targets.resize(rows, kStateDim);
  b.mask.resize(static_cast<std::size_t>(rows));
  for (int i = 0; i < b.batch; ++i) {
    const auto& tr = traces[static_cast<std::size_t>(i)];
    if (tr.length() != b.seq) throw Error(Errc::ShapeMismatch, "traces differ in length");
    const Eigen::Index r0 = static_cast<Eigen::Index>(i) * b.seq;
    b.tokens.middleRows(r0, b.seq) = tr.tokens.cast<float>();
    b.targets.middleRows(r0, b.seq) = tr.targets.cast<float>();
    std::copy(tr.loss_mask.begin(), tr.loss_mask.end(), b.mask.begin() + r0);
  }
  return b;
}

Batch slice_batch(const Batch& batch, int first, int count) {
  Batch out;
  out.batch = count;
  out.seq = batch.seq;
  const Eigen::Index r0 = static_cast<Eigen::Index>(first) * batch.seq;
  const Eigen::Index rows = static_cast<Eigen::Index>(count) * batch.seq;
  out.tokens = batch.tokens.middleRows(r0, rows);
  out.targets = batch.targets.middleRows(r0, rows);
  out.mask.assign(batch.mask.begin() + r0, batch.mask.begin() + r0 + rows);
  return out;
}

template <class T>
double masked_mse(const ad::Matrix<T>& predictions, const ad::Matrix<T>& targets,
                  std::span<const std::uint8_t> mask) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols() ||
      mask.size() != static_cast<std::size_t>(predictions.rows())) {
    throw Error(Errc::ShapeMismatch, "predictions, targets and mask disagree");
  }
  double total = 0.0;
  std::size_t active = 0;
  for (Eigen::Index i = 0; i < predictions.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    ++active;
    total += (predictions.row(i) - targets.row(i)).template cast<double>().squaredNorm();
  }
  if (active == 0) throw Error(Errc::EmptyMask, "no active position in the loss mask");
  return total / (static_cast<double>(active) * static_cast<double>(predictions.cols()));
}

template double masked_mse<float>(const ad::Matrix<float>&, const ad::Matrix<float>&,
                                  std::span<const std::uint8_t>);
template double masked_mse<double>(const ad::Matrix<double>&, const ad::Matrix<double>&,
                                   std::span<const std::uint8_t>);

StepResult train_step(ModelState& state, const Batch& batch) {
  auto& model = state.model;
  const TrainConfig& tc = state.train;
  std::size_t active = 0;
  for (auto m : batch.mask) active += m;
  if (active == 0) throw Error(Errc::EmptyMask, "batch has no active position");
  const float weight = 1.0f / static_cast<float>(active * kStateDim);

  model.zero_grads();
  double loss = 0.0;
  const int chunk = std::max(1, tc.micro_batch);
  for (int first = 0; first < batch.batch; first += chunk) {
    const int count = std::min(chunk, batch.batch - first);
    const Batch part = count == batch.batch ? batch : slice_batch(batch, first, count);
    ad::Tape<float> tape;
    const auto bound = model.bind(tape, true);
    auto pred = model.forward(tape, bound, part.tokens, part.batch, part.seq);
    auto l = ad::masked_sse(tape, pred, part.targets, part.mask, weight);
    loss += static_cast<double>(l->value(0, 0));
    tape.backward(l);
    model.accumulate_grads(bound);
  }
  if (!std::isfinite(loss)) {
    throw Error(Errc::NonFiniteLoss, "loss " + std::to_string(loss) + " at step " +
                                         std::to_string(state.step) + " (examples_seen " +
                                         std::to_string(state.examples_seen) + ")");
  }

  // AdamW: decoupled weight decay, then the bias-corrected Adam step.
  const double t = static_cast<double>(state.step + 1);
  const float lr = static_cast<float>(tc.learning_rate);
  const float wd = static_cast<float>(tc.weight_decay);
  const float b1 = static_cast<float>(tc.beta1);
  const float b2 = static_cast<float>(tc.beta2);
  const float c1 = static_cast<float>(1.0 - std::pow(tc.beta1, t));
  const float c2 = static_cast<float>(1.0 - std::pow(tc.beta2, t));
  const float eps = static_cast<float>(tc.eps);
  for (auto& p : model.params()) {
    if (lr != 0.0f && wd != 0.0f) p.value *= (1.0f - lr * wd);
    p.m = b1 * p.m + (1.0f - b1) * p.grad;
    p.v = b2 * p.v + (1.0f - b2) * p.grad.cwiseProduct(p.grad);
    if (lr != 0.0f) {
      p.value.array() -= lr * (p.m.array() / c1) / ((p.v.array() / c2).sqrt() + eps);
    }
  }
  ++state.step;
  state.examples_seen += static_cast<std::uint64_t>(batch.batch);
  return {loss};
}

std::vector<InterleavedTrace> training_traces(const TraceLibrary& library, std::uint64_t data_seed,
                                              std::uint64_t step, int batch_size,
                                              const GenConfig& cfg) {
  // Stream `step` of the data seed, then one child stream per trace.
  const std::uint64_t step_seed = derive_seed(data_seed, step);
  return interleave_batch(library, step_seed, 0, static_cast<std::size_t>(batch_size), cfg);
}

BatchProducer::BatchProducer(const TraceLibrary& library, std::uint64_t data_seed,
                             std::uint64_t first_step, int batch_size, std::size_t capacity,
                             GenConfig cfg)
    : library_(library),
      data_seed_(data_seed),
      next_step_(first_step),
      batch_size_(batch_size),
      capacity_(std::max<std::size_t>(1, capacity)),
      cfg_(cfg),
      worker_([this](std::stop_token st) { run(st); }) {}

BatchProducer::~BatchProducer() {
  worker_.request_stop();
  cv_.notify_all();
}

void BatchProducer::run(std::stop_token stop) {
  while (!stop.stop_requested()) {
    auto traces = training_traces(library_, data_seed_, next_step_, batch_size_, cfg_);
    Batch b = make_batch(traces);
    std::unique_lock lock(mu_);
    cv_.wait(lock, stop, [&] { return queue_.size() < capacity_; });
    if (stop.stop_requested()) return;
    queue_.push_back(std::move(b));
    ++next_step_;
    cv_.notify_all();
  }
}

Batch BatchProducer::next() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !queue_.empty(); });
  Batch b = std::move(queue_.front());
  queue_.pop_front();
  cv_.notify_all();
  return b;
}

void train_steps(ModelState& state, const TraceLibrary& library, std::uint64_t steps,
                 const std::function<void(const TrainProgress&)>& on_step, const GenConfig& cfg) {
  if (steps == 0) return;
  BatchProducer producer(library, state.data_seed, state.step, state.train.batch_size, 2, cfg);
  for (std::uint64_t i = 0; i < steps; ++i) {
    const Batch batch = producer.next();
    const StepResult r = train_step(state, batch);
    if (on_step) on_step({state.step, state.examples_seen, r.loss});
  }
}

}  // namespace ilts
