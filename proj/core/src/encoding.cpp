#include "ilts/trace.hpp"

#include <string>

namespace ilts {

TokenRow encode_special(TokenKind kind, int pair) {
  TokenRow row = TokenRow::Zero();
  switch (kind) {
    case TokenKind::Start:
      row(kStartDim) = 1.0;
      return row;
    case TokenKind::Open:
    case TokenKind::Close:
      if (pair < 0 || pair >= kLabelPairs) {
        throw Error(Errc::PairOutOfRange, "label pair " + std::to_string(pair));
      }
      row(kind == TokenKind::Open ? open_dim(pair) : close_dim(pair)) = 1.0;
      return row;
    case TokenKind::Obs:
      break;
  }
  throw Error(Errc::InvalidArgument, "observations are not special symbols");
}

TokenRow encode_obs(const StateVec& x) {
  TokenRow row = TokenRow::Zero();
  row(kPayloadFlagDim) = 1.0;
  for (int d = 0; d < kStateDim; ++d) row(kPayloadBase + d) = x(d);
  return row;
}

StateVec decode_obs(const TokenRow& row) {
  StateVec x;
  for (int d = 0; d < kStateDim; ++d) x(d) = row(kPayloadBase + d);
  return x;
}

void build_targets_and_mask(InterleavedTrace& trace) {
  const int n = trace.length();
  trace.targets = TargetMatrix::Zero(n, kStateDim);
  trace.loss_mask.assign(static_cast<std::size_t>(n), 0);
  for (int t = 0; t + 1 < n; ++t) {
    if (trace.provenance[static_cast<std::size_t>(t) + 1].kind != TokenKind::Obs) continue;
    trace.loss_mask[static_cast<std::size_t>(t)] = 1;
    for (int d = 0; d < kStateDim; ++d) {
      trace.targets(t, d) = trace.tokens(t + 1, kPayloadBase + d);
    }
  }
}

InterleavedTrace make_trace(std::span<const Provenance> provenance,
                            std::span<const StateVec> payloads) {
  if (provenance.size() != payloads.size()) {
    throw Error(Errc::ShapeMismatch, "provenance and payload lengths differ");
  }
  InterleavedTrace trace;
  const auto n = static_cast<Eigen::Index>(provenance.size());
  trace.tokens = TokenMatrix::Zero(n, kTokenDim);
  trace.provenance.assign(provenance.begin(), provenance.end());
  for (Eigen::Index t = 0; t < n; ++t) {
    const Provenance& p = provenance[static_cast<std::size_t>(t)];
    trace.tokens.row(t) = p.kind == TokenKind::Obs ? encode_obs(payloads[static_cast<std::size_t>(t)])
                                                   : encode_special(p.kind, p.pair);
  }
  build_targets_and_mask(trace);
  return trace;
}

}  // namespace ilts
