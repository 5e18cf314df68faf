#pragma once

// Forward pass of a Transformer in which every reader's residual input is the
// gate-weighted sum of its upstream writers. With every gate at 1 this equals
// Transformer::forward up to summation order. The attention output bias is
// split evenly across the heads of its layer.

#include <vector>

#include "ilts/edge_graph.hpp"

namespace ilts {

// `gates` is a 1 x graph.size() row. Model parameters enter the tape as
// constants, so only the gates (if requires_grad) receive gradients.
template <class T>
ad::Var<T> disentangled_forward(ad::Tape<T>& tape, const Transformer<T>& model, const EdgeGraph& graph,
                                ad::Var<T> gates, const ad::Matrix<T>& tokens, int batch, int seq);

template <class T>
ad::Matrix<T> disentangled_predict(const Transformer<T>& model, const EdgeGraph& graph,
                                   const ad::Matrix<T>& gates, const ad::Matrix<T>& tokens, int batch,
                                   int seq);

extern template ad::Var<float> disentangled_forward<float>(ad::Tape<float>&, const Transformer<float>&,
                                                           const EdgeGraph&, ad::Var<float>,
                                                           const ad::Matrix<float>&, int, int);
extern template ad::Var<double> disentangled_forward<double>(ad::Tape<double>&, const Transformer<double>&,
                                                             const EdgeGraph&, ad::Var<double>,
                                                             const ad::Matrix<double>&, int, int);

}  // namespace ilts
