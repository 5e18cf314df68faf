#include "ilts/disentangled.hpp"

#include <string>

namespace ilts {

namespace {

using IndexMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Coefficients for readers [r0, r0 + count) over writers [0, n_writers).
template <class T>
ad::Var<T> reader_coefficients(ad::Tape<T>& tape, const EdgeGraph& graph, ad::Var<T> gates, int r0,
                               int count, int n_writers) {
  IndexMatrix idx(count, n_writers);
  ad::Matrix<T> fixed = ad::Matrix<T>::Zero(count, n_writers);
  for (int i = 0; i < count; ++i) {
    for (int w = 0; w < n_writers; ++w) {
      const int e = graph.edge_index(w, r0 + i);
      idx(i, w) = e;
      // Ungated embed connection.
      if (e < 0 && w == 0) fixed(i, w) = T(1);
    }
  }
  return ad::scatter_gates(tape, gates, idx, fixed);
}

}  // namespace

template <class T>
ad::Var<T> disentangled_forward(ad::Tape<T>& tape, const Transformer<T>& model, const EdgeGraph& graph,
                                ad::Var<T> gates, const ad::Matrix<T>& tokens, int batch, int seq) {
  const ModelConfig& cfg = model.config();
  if (graph.n_layers() != cfg.n_layers || graph.n_heads() != cfg.n_heads) {
    throw Error(Errc::GraphMismatch, "edge graph does not match the model");
  }
  if (gates->value.rows() != 1 || gates->value.cols() != static_cast<Eigen::Index>(graph.size())) {
    throw Error(Errc::ShapeMismatch, "gates must be 1 x " + std::to_string(graph.size()));
  }
  if (tokens.cols() != cfg.in_dim || tokens.rows() != static_cast<Eigen::Index>(batch) * seq ||
      seq > cfg.context_len || seq <= 0) {
    throw Error(Errc::ShapeMismatch, "tokens do not match the model input");
  }
  const Eigen::Index n = tokens.rows();
  const Eigen::Index d = cfg.d_model;
  const Eigen::Index dh = cfg.d_head;
  const int H = cfg.n_heads;
  const auto p = model.bind(tape, false);
  const auto& slots = model.slots();
  auto at = [&](int slot) { return p[static_cast<std::size_t>(slot)]; };

  std::vector<ad::Var<T>> writers;
  auto x = tape.constant(tokens);
  auto emb = ad::linear(tape, x, at(slots.w_in), at(slots.b_in));
  writers.push_back(ad::add_positional(tape, emb, at(slots.wpe), batch, seq));

  int reader = 0;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& s = slots.layers[static_cast<std::size_t>(l)];
    const int nw = graph.writers_before(l);
    auto coef = reader_coefficients(tape, graph, gates, reader, 3 * H, nw);
    auto mixed = ad::mix(tape, std::vector<ad::Var<T>>(writers.begin(), writers.begin() + nw), coef);
    reader += 3 * H;

    auto b_o = ad::scale(tape, at(s.b_o), T(1) / static_cast<T>(H));
    std::vector<ad::Var<T>> head_out;
    for (int h = 0; h < H; ++h) {
      ad::Var<T> qkv[3];
      for (int j = 0; j < 3; ++j) {
        auto in = ad::row_as_matrix(tape, mixed, j * H + h, n, d);
        auto a = ad::layer_norm(tape, in, at(s.ln1_g), at(s.ln1_b));
        const Eigen::Index c0 = j * d + h * dh;
        auto w = ad::slice_cols(tape, at(s.w_qkv), c0, dh);
        auto b = ad::slice_cols(tape, at(s.b_qkv), c0, dh);
        qkv[j] = ad::linear(tape, a, w, b);
      }
      auto z = ad::causal_attention(tape, qkv[0], qkv[1], qkv[2], batch, seq, 1);
      auto wo = ad::slice_rows(tape, at(s.w_o), h * dh, dh);
      head_out.push_back(ad::linear(tape, z, wo, b_o));
    }
    writers.insert(writers.end(), head_out.begin(), head_out.end());

    auto mcoef = reader_coefficients(tape, graph, gates, reader, 1, nw + H);
    auto min = ad::row_as_matrix(tape, ad::mix(tape, writers, mcoef), 0, n, d);
    reader += 1;
    auto m = ad::layer_norm(tape, min, at(s.ln2_g), at(s.ln2_b));
    m = ad::gelu(tape, ad::linear(tape, m, at(s.w_fc), at(s.b_fc)));
    writers.push_back(ad::linear(tape, m, at(s.w_proj), at(s.b_proj)));
  }

  auto rcoef = reader_coefficients(tape, graph, gates, reader, 1, static_cast<int>(writers.size()));
  auto resid = ad::row_as_matrix(tape, ad::mix(tape, writers, rcoef), 0, n, d);
  auto f = ad::layer_norm(tape, resid, at(slots.lnf_g), at(slots.lnf_b));
  return ad::linear(tape, f, at(slots.w_out), at(slots.b_out));
}

template <class T>
ad::Matrix<T> disentangled_predict(const Transformer<T>& model, const EdgeGraph& graph,
                                   const ad::Matrix<T>& gates, const ad::Matrix<T>& tokens, int batch,
                                   int seq) {
  ad::Tape<T> tape;
  auto g = tape.constant(gates);
  return disentangled_forward(tape, model, graph, g, tokens, batch, seq)->value;
}

template ad::Var<float> disentangled_forward<float>(ad::Tape<float>&, const Transformer<float>&,
                                                    const EdgeGraph&, ad::Var<float>,
                                                    const ad::Matrix<float>&, int, int);
template ad::Var<double> disentangled_forward<double>(ad::Tape<double>&, const Transformer<double>&,
                                                      const EdgeGraph&, ad::Var<double>,
                                                      const ad::Matrix<double>&, int, int);
template ad::Matrix<float> disentangled_predict<float>(const Transformer<float>&, const EdgeGraph&,
                                                       const ad::Matrix<float>&, const ad::Matrix<float>&,
                                                       int, int);
template ad::Matrix<double> disentangled_predict<double>(const Transformer<double>&, const EdgeGraph&,
                                                         const ad::Matrix<double>&,
                                                         const ad::Matrix<double>&, int, int);

}  // namespace ilts
