#pragma once

// Edge pruning: hard-concrete gates over the disentangled graph trained on a
// single prediction site, threshold quantization to a target sparsity, and
// circuit evaluation, comparison and export.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ilts/disentangled.hpp"
#include "ilts/needle.hpp"

namespace ilts {

enum class CircuitTask : std::uint8_t { OneAfter = 1, TwoAfter = 2 };

std::string_view task_name(CircuitTask task);
CircuitTask parse_task(std::string_view name);  // "one-after" / "two-after"

// Hard-concrete stretch interval and temperature.
inline constexpr double kGateLeft = -0.1;
inline constexpr double kGateRight = 1.1;
inline constexpr double kGateBeta = 2.0 / 3.0;

struct GateTrainConfig {
  double k_scale = 100.0;
  double sparsity_target = 0.98;
  int steps = 200;
  int batch = 16;
  // Target sparsity s ramps linearly from 0 to sparsity_target over this many steps.
  int sparsity_warmup = 50;
  double gate_lr = 0.1;    // Adam on log alpha
  double lambda_lr = 1.0;  // gradient ascent on the Lagrange multipliers
  double init_log_alpha = 3.0;
  bool gate_embed = true;
  std::uint64_t seed = 0;
};

struct EdgeGateSet {
  EdgeGraph graph;
  std::vector<double> log_alpha;
  double k_scale = 0.0;
  double sparsity_target = 0.98;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<double> loss_history;

  // Gate used at evaluation time: clamp(sigmoid(a) (r - l) + l, 0, 1).
  std::vector<double> deterministic() const;
  // Quantization score: sigmoid(log alpha).
  std::vector<double> scores() const;
  // 1 - mean P(gate != 0).
  double expected_sparsity() const;
};

// Prediction row the task's loss and metric are measured at.
int task_row(const NeedleDataset& data, CircuitTask task);

// Minimizes k * (masked MSE at the task site) + lambda1 (s - s_hat) +
// lambda2 (s - s_hat)^2 over log alpha with the model frozen. Batches cycle
// over the dataset's traces. Errc::Diverged on a non-finite loss.
EdgeGateSet train_gates(const Transformer<float>& model, const NeedleDataset& task_data, CircuitTask task,
                        const GateTrainConfig& cfg);

struct CircuitMse {
  double one_after = 0.0;
  double two_after = 0.0;
};

struct Circuit {
  EdgeGraph graph;
  std::vector<std::uint8_t> kept;  // per edge
  CircuitTask task = CircuitTask::OneAfter;
  double k_scale = 0.0;
  double threshold = 0.0;
  CircuitMse mse;

  std::size_t kept_count() const;
  double sparsity() const;
  static Circuit full(const EdgeGraph& graph);
  static Circuit empty(const EdgeGraph& graph);
};

// Smallest threshold (bisection on [0, 1] to `precision`) whose sparsity
// reaches the target; edges with score >= threshold are kept. When every score
// is equal the search ends just above that value and nothing is kept.
Circuit quantize(const EdgeGateSet& gates, CircuitTask task, double sparsity_target = 0.98,
                 double precision = 1e-5);
// Edges kept at a fixed threshold.
std::size_t kept_at(const std::vector<double>& scores, double threshold);

// Mean (over traces) squared error at the 1-after and 2-after final sites
// with pruned edges removed exactly.
CircuitMse eval_circuit(const Transformer<float>& model, const Circuit& circuit, const NeedleDataset& data,
                        int batch = 16);

struct Overlap {
  std::size_t shared = 0;
  double jaccard = 0.0;
};

// Errc::GraphMismatch unless both circuits live on the same graph.
Overlap overlap(const Circuit& a, const Circuit& b);

// DOT text: "//" header lines with the graph shape, task, k, sparsity and MSE
// pair, then one quoted edge per line.
std::string export_circuit(const Circuit& circuit);
Circuit parse_circuit(std::string_view text);  // Errc::CorruptFile

}  // namespace ilts
