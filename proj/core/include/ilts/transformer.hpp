#pragma once

// GPT-2 style decoder with a linear 57 -> d_model input map, learned
// positional embeddings, pre-norm blocks (causal attention + 4x GELU MLP),
// a final layer norm and an untied linear d_model -> 5 head.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ilts/autodiff.hpp"
#include "ilts/common.hpp"

namespace ilts {

enum class SizePreset : std::uint8_t { Tiny = 0, Small = 1, Medium = 2, Big = 3, Custom = 255 };

std::string_view preset_name(SizePreset preset);
SizePreset parse_preset(std::string_view name);  // Errc::UnknownPreset

struct ModelConfig {
  int n_layers = 12;
  int d_model = 128;
  int n_heads = 8;
  int d_head = 16;
  int context_len = kContextLen;
  int in_dim = kTokenDim;
  int out_dim = kStateDim;
  SizePreset size = SizePreset::Medium;

  static ModelConfig preset(SizePreset size);
  // Errc::InvalidDims unless n_heads * d_head == d_model and all dims > 0.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <class T>
struct Parameter {
  std::string name;
  ad::Matrix<T> value;
  ad::Matrix<T> grad;
  ad::Matrix<T> m;  // Adam first moment
  ad::Matrix<T> v;  // Adam second moment
};

// Indices of each block's tensors in Transformer::params().
struct LayerSlots {
  int ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o, ln2_g, ln2_b, w_fc, b_fc, w_proj, b_proj;
};

struct ParamSlots {
  int w_in, b_in, wpe;
  std::vector<LayerSlots> layers;
  int lnf_g, lnf_b, w_out, b_out;
};

template <class T>
class Transformer {
 public:
  Transformer() = default;
  // GPT-2 initialization: N(0, 0.02) weights, residual projections scaled by
  // 1/sqrt(2 n_layers), zero biases, unit layer-norm gains.
  Transformer(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const ParamSlots& slots() const { return slots_; }
  std::vector<Parameter<T>>& params() { return params_; }
  const std::vector<Parameter<T>>& params() const { return params_; }
  std::size_t parameter_count() const;

  // Puts every parameter on the tape; returned vector is indexed like params().
  std::vector<ad::Var<T>> bind(ad::Tape<T>& tape, bool requires_grad) const;
  // Adds tape gradients of bound parameters into Parameter::grad.
  void accumulate_grads(const std::vector<ad::Var<T>>& bound);
  void zero_grads();

  // tokens: (batch*seq x 57), seq <= context_len. Returns (batch*seq x 5).
  ad::Var<T> forward(ad::Tape<T>& tape, const std::vector<ad::Var<T>>& bound,
                     const ad::Matrix<T>& tokens, int batch, int seq) const;

  // Convenience inference path.
  ad::Matrix<T> predict(const ad::Matrix<T>& tokens, int batch, int seq) const;

  template <class U>
  Transformer<U> cast() const {
    Transformer<U> out;
    out.cfg_ = cfg_;
    out.slots_ = slots_;
    out.params_.reserve(params_.size());
    for (const auto& p : params_) {
      Parameter<U> q;
      q.name = p.name;
      q.value = p.value.template cast<U>();
      q.grad = ad::Matrix<U>::Zero(p.value.rows(), p.value.cols());
      q.m = p.m.template cast<U>();
      q.v = p.v.template cast<U>();
      out.params_.push_back(std::move(q));
    }
    return out;
  }

  void zero_output_head();

 private:
  template <class U>
  friend class Transformer;

  int add_param(std::string name, Eigen::Index rows, Eigen::Index cols);

  ModelConfig cfg_;
  ParamSlots slots_{};
  std::vector<Parameter<T>> params_;
};

extern template class Transformer<float>;
extern template class Transformer<double>;

// Closed-form count of every trainable scalar (embeddings, positional table
// over context_len, layer norms, biases and the head).
std::size_t count_parameters(const ModelConfig& cfg);

}  // namespace ilts
