#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "ilts/interleave.hpp"
#include "ilts/transformer.hpp"

namespace ilts {

struct TrainConfig {
  int batch_size = 512;
  double learning_rate = 1.58e-5;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  // Traces per forward/backward chunk; gradients accumulate across chunks.
  int micro_batch = 16;
  std::vector<std::uint64_t> checkpoint_schedule;  // examples_seen thresholds

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Base recipe: Medium at batch 512 with lr 1.58e-5.
inline constexpr double kBaseLearningRate = 1.58e-5;
inline constexpr int kBaseBatch = 512;

// Size ladder (x2 per step down from Medium, x5/6 up to Big) times
// sqrt(batch / 512). Errc::UnknownPreset for custom models.
TrainConfig scale_hyperparams(const TrainConfig& base, const ModelConfig& target, int batch);

// Traces stacked into model-ready float matrices.
struct Batch {
  ad::Matrix<float> tokens;   // (batch*seq x 57)
  ad::Matrix<float> targets;  // (batch*seq x 5)
  std::vector<std::uint8_t> mask;
  int batch = 0;
  int seq = 0;
};

// All traces must share a length (Errc::ShapeMismatch otherwise).
Batch make_batch(std::span<const InterleavedTrace> traces);
Batch slice_batch(const Batch& batch, int first, int count);

// Mean over masked positions and the 5 output dimensions.
// Errc::EmptyMask when no position is active; Errc::ShapeMismatch on shape errors.
template <class T>
double masked_mse(const ad::Matrix<T>& predictions, const ad::Matrix<T>& targets,
                  std::span<const std::uint8_t> mask);

struct ModelState {
  Transformer<float> model;
  TrainConfig train;
  std::uint64_t examples_seen = 0;
  std::uint64_t step = 0;
  std::uint64_t data_seed = 0;  // batch b is drawn from make_rng(data_seed, b)
  Family family = Family::Orthogonal;  // family of the training library
};

struct StepResult {
  double loss = 0.0;
};

// One AdamW update on `batch`. Errc::NonFiniteLoss if the loss is NaN/Inf
// (parameters are left untouched in that case).
StepResult train_step(ModelState& state, const Batch& batch);

// Interleaved traces for training step `step`, reproducible from the seed.
std::vector<InterleavedTrace> training_traces(const TraceLibrary& library, std::uint64_t data_seed,
                                              std::uint64_t step, int batch_size,
                                              const GenConfig& cfg = {});

struct TrainProgress {
  std::uint64_t step = 0;  // steps completed
  std::uint64_t examples_seen = 0;
  double loss = 0.0;
};

// Runs `steps` further updates on batches streamed from `library`, continuing
// the batch sequence at state.step. `on_step` runs after every update.
void train_steps(ModelState& state, const TraceLibrary& library, std::uint64_t steps,
                 const std::function<void(const TrainProgress&)>& on_step = {},
                 const GenConfig& cfg = {});

// Bounded producer/consumer queue generating batches ahead of the trainer.
class BatchProducer {
 public:
  BatchProducer(const TraceLibrary& library, std::uint64_t data_seed, std::uint64_t first_step,
                int batch_size, std::size_t capacity = 2, GenConfig cfg = {});
  ~BatchProducer();
  BatchProducer(const BatchProducer&) = delete;
  BatchProducer& operator=(const BatchProducer&) = delete;

  Batch next();

 private:
  void run(std::stop_token stop);

  const TraceLibrary& library_;
  std::uint64_t data_seed_;
  std::uint64_t next_step_;
  int batch_size_;
  std::size_t capacity_;
  GenConfig cfg_;
  std::mutex mu_;
  std::condition_variable_any cv_;
  std::deque<Batch> queue_;
  std::jthread worker_;
};

}  // namespace ilts
