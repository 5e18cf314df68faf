#include "ilts/transformer.hpp"

#include <cmath>
#include <random>
#include <string>

namespace ilts {

std::string_view preset_name(SizePreset preset) {
  switch (preset) {
    case SizePreset::Tiny: return "tiny";
    case SizePreset::Small: return "small";
    case SizePreset::Medium: return "medium";
    case SizePreset::Big: return "big";
    case SizePreset::Custom: return "custom";
  }
  return "custom";
}

SizePreset parse_preset(std::string_view name) {
  if (name == "tiny") return SizePreset::Tiny;
  if (name == "small") return SizePreset::Small;
  if (name == "medium") return SizePreset::Medium;
  if (name == "big") return SizePreset::Big;
  throw Error(Errc::UnknownPreset, "unknown preset '" + std::string(name) + "'");
}

ModelConfig ModelConfig::preset(SizePreset size) {
  ModelConfig c;
  c.size = size;
  switch (size) {
    case SizePreset::Tiny: c.n_layers = 3; c.d_model = 72; c.n_heads = 6; c.d_head = 12; break;
    case SizePreset::Small: c.n_layers = 6; c.d_model = 96; c.n_heads = 6; c.d_head = 16; break;
    case SizePreset::Medium: c.n_layers = 12; c.d_model = 128; c.n_heads = 8; c.d_head = 16; break;
    case SizePreset::Big: c.n_layers = 24; c.d_model = 192; c.n_heads = 12; c.d_head = 16; break;
    case SizePreset::Custom: throw Error(Errc::UnknownPreset, "custom is not a preset");
  }
  return c;
}

void ModelConfig::validate() const {
  if (n_layers <= 0 || d_model <= 0 || n_heads <= 0 || d_head <= 0 || context_len <= 0 ||
      in_dim <= 0 || out_dim <= 0) {
    throw Error(Errc::InvalidDims, "model dimensions must be positive");
  }
  if (n_heads * d_head != d_model) {
    throw Error(Errc::InvalidDims, "n_heads * d_head (" + std::to_string(n_heads * d_head) +
                                       ") != d_model (" + std::to_string(d_model) + ")");
  }
}

std::size_t count_parameters(const ModelConfig& c) {
  const std::size_t d = static_cast<std::size_t>(c.d_model);
  const std::size_t per_layer = 2 * d + (d * 3 * d + 3 * d) + (d * d + d) + 2 * d +
                                (d * 4 * d + 4 * d) + (4 * d * d + d);
  return static_cast<std::size_t>(c.in_dim) * d + d + static_cast<std::size_t>(c.context_len) * d +
         static_cast<std::size_t>(c.n_layers) * per_layer + 2 * d +
         d * static_cast<std::size_t>(c.out_dim) + static_cast<std::size_t>(c.out_dim);
}

template <class T>
int Transformer<T>::add_param(std::string name, Eigen::Index rows, Eigen::Index cols) {
  Parameter<T> p;
  p.name = std::move(name);
  p.value = ad::Matrix<T>::Zero(rows, cols);
  p.grad = ad::Matrix<T>::Zero(rows, cols);
  p.m = ad::Matrix<T>::Zero(rows, cols);
  p.v = ad::Matrix<T>::Zero(rows, cols);
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

template <class T>
Transformer<T>::Transformer(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const Eigen::Index d = cfg.d_model;
  slots_.w_in = add_param("embed.w", cfg.in_dim, d);
  slots_.b_in = add_param("embed.b", 1, d);
  slots_.wpe = add_param("wpe", cfg.context_len, d);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "h" + std::to_string(l) + ".";
    LayerSlots s{};
    s.ln1_g = add_param(pre + "ln_1.g", 1, d);
    s.ln1_b = add_param(pre + "ln_1.b", 1, d);
    s.w_qkv = add_param(pre + "attn.c_attn.w", d, 3 * d);
    s.b_qkv = add_param(pre + "attn.c_attn.b", 1, 3 * d);
    s.w_o = add_param(pre + "attn.c_proj.w", d, d);
    s.b_o = add_param(pre + "attn.c_proj.b", 1, d);
    s.ln2_g = add_param(pre + "ln_2.g", 1, d);
    s.ln2_b = add_param(pre + "ln_2.b", 1, d);
    s.w_fc = add_param(pre + "mlp.c_fc.w", d, 4 * d);
    s.b_fc = add_param(pre + "mlp.c_fc.b", 1, 4 * d);
    s.w_proj = add_param(pre + "mlp.c_proj.w", 4 * d, d);
    s.b_proj = add_param(pre + "mlp.c_proj.b", 1, d);
    slots_.layers.push_back(s);
  }
  slots_.lnf_g = add_param("ln_f.g", 1, d);
  slots_.lnf_b = add_param("ln_f.b", 1, d);
  slots_.w_out = add_param("head.w", d, cfg.out_dim);
  slots_.b_out = add_param("head.b", 1, cfg.out_dim);

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  const double resid_scale = 1.0 / std::sqrt(2.0 * cfg.n_layers);
  auto fill = [&](int slot, double scale) {
    auto& v = params_[static_cast<std::size_t>(slot)].value;
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = static_cast<T>(normal(rng) * scale);
  };
  fill(slots_.w_in, 1.0);
  fill(slots_.wpe, 1.0);
  for (const auto& s : slots_.layers) {
    params_[static_cast<std::size_t>(s.ln1_g)].value.setOnes();
    params_[static_cast<std::size_t>(s.ln2_g)].value.setOnes();
    fill(s.w_qkv, 1.0);
    fill(s.w_o, resid_scale);
    fill(s.w_fc, 1.0);
    fill(s.w_proj, resid_scale);
  }
  params_[static_cast<std::size_t>(slots_.lnf_g)].value.setOnes();
  fill(slots_.w_out, 1.0);
}

template <class T>
std::size_t Transformer<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <class T>
std::vector<ad::Var<T>> Transformer<T>::bind(ad::Tape<T>& tape, bool requires_grad) const {
  std::vector<ad::Var<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(tape.make(p.value, requires_grad));
  return out;
}

template <class T>
void Transformer<T>::accumulate_grads(const std::vector<ad::Var<T>>& bound) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (bound[i]->has_grad()) params_[i].grad += bound[i]->grad;
  }
}

template <class T>
void Transformer<T>::zero_grads() {
  for (auto& p : params_) p.grad.setZero();
}

template <class T>
void Transformer<T>::zero_output_head() {
  params_[static_cast<std::size_t>(slots_.w_out)].value.setZero();
  params_[static_cast<std::size_t>(slots_.b_out)].value.setZero();
}

template <class T>
ad::Var<T> Transformer<T>::forward(ad::Tape<T>& tape, const std::vector<ad::Var<T>>& p,
                                   const ad::Matrix<T>& tokens, int batch, int seq) const {
  if (tokens.cols() != cfg_.in_dim || tokens.rows() != static_cast<Eigen::Index>(batch) * seq ||
      seq > cfg_.context_len || seq <= 0) {
    throw Error(Errc::ShapeMismatch, "tokens must be (batch*seq x " + std::to_string(cfg_.in_dim) +
                                         ") with seq <= " + std::to_string(cfg_.context_len));
  }
  auto at = [&](int slot) { return p[static_cast<std::size_t>(slot)]; };

  auto x = tape.constant(tokens);
  auto h = ad::linear(tape, x, at(slots_.w_in), at(slots_.b_in));
  h = ad::add_positional(tape, h, at(slots_.wpe), batch, seq);
  for (const auto& s : slots_.layers) {
    auto a = ad::layer_norm(tape, h, at(s.ln1_g), at(s.ln1_b));
    auto qkv = ad::linear(tape, a, at(s.w_qkv), at(s.b_qkv));
    auto att = ad::causal_attention(tape, qkv, batch, seq, cfg_.n_heads);
    auto o = ad::linear(tape, att, at(s.w_o), at(s.b_o));
    h = ad::add(tape, h, o);
    auto m = ad::layer_norm(tape, h, at(s.ln2_g), at(s.ln2_b));
    m = ad::gelu(tape, ad::linear(tape, m, at(s.w_fc), at(s.b_fc)));
    m = ad::linear(tape, m, at(s.w_proj), at(s.b_proj));
    h = ad::add(tape, h, m);
  }
  h = ad::layer_norm(tape, h, at(slots_.lnf_g), at(slots_.lnf_b));
  return ad::linear(tape, h, at(slots_.w_out), at(slots_.b_out));
}

template <class T>
ad::Matrix<T> Transformer<T>::predict(const ad::Matrix<T>& tokens, int batch, int seq) const {
  ad::Tape<T> tape;
  const auto bound = bind(tape, false);
  return forward(tape, bound, tokens, batch, seq)->value;
}

template class Transformer<float>;
template class Transformer<double>;

}  // namespace ilts
