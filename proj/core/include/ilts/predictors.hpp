#pragma once

// Predictors share one interface so models and reference baselines go
// through identical masks and index conventions.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ilts/trace.hpp"
#include "ilts/transformer.hpp"

namespace ilts {

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string name() const = 0;
  // out[i] holds one row per entry of rows[i]: the prediction emitted at that
  // position of traces[i] (i.e. for the token at row + 1).
  virtual std::vector<TargetMatrix> predict(std::span<const InterleavedTrace> traces,
                                            std::span<const std::vector<int>> rows) const = 0;
};

// Always predicts the prior mean.
class ZeroPredictor final : public Predictor {
 public:
  std::string name() const override { return "zero"; }
  std::vector<TargetMatrix> predict(std::span<const InterleavedTrace> traces,
                                    std::span<const std::vector<int>> rows) const override;
};

// Least squares on everything observed under the currently open label: the
// history is every earlier observation in a segment opened with the same
// label, fed through pinv_predict. Zero when no label is open.
class PinvPredictor final : public Predictor {
 public:
  std::string name() const override { return "pinv"; }
  std::vector<TargetMatrix> predict(std::span<const InterleavedTrace> traces,
                                    std::span<const std::vector<int>> rows) const override;
};

// Oracle that knows which system the next observation comes from (its
// provenance slot) and applies pinv_predict to that slot's history. This is
// the noise-free recall ceiling for needle tests.
class PerfectRecallPredictor final : public Predictor {
 public:
  std::string name() const override { return "perfect-recall"; }
  std::vector<TargetMatrix> predict(std::span<const InterleavedTrace> traces,
                                    std::span<const std::vector<int>> rows) const override;
};

class ModelPredictor final : public Predictor {
 public:
  explicit ModelPredictor(const Transformer<float>& model, int batch = 16, std::string name = "model")
      : model_(&model), batch_(batch), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  std::vector<TargetMatrix> predict(std::span<const InterleavedTrace> traces,
                                    std::span<const std::vector<int>> rows) const override;

 private:
  const Transformer<float>* model_;
  int batch_;
  std::string name_;
};

}  // namespace ilts
