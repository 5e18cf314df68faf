#include "ilts/predictors.hpp"

#include "ilts/dynsys.hpp"

namespace ilts {

namespace {

void check_rows(std::span<const InterleavedTrace> traces, std::span<const std::vector<int>> rows) {
  if (traces.size() != rows.size()) throw Error(Errc::ShapeMismatch, "one row list per trace");
  for (std::size_t i = 0; i < traces.size(); ++i) {
    for (int r : rows[i]) {
      if (r < 0 || r >= traces[i].length()) {
        throw Error(Errc::InvalidArgument, "row " + std::to_string(r) + " outside trace");
      }
    }
  }
}

StateVec payload(const InterleavedTrace& tr, int row) {
  return decode_obs(tr.tokens.row(row));
}

// Observations at rows <= `row` selected by `keep`, in order.
template <class Keep>
std::vector<StateVec> history_upto(const InterleavedTrace& tr, int row, Keep keep) {
  std::vector<StateVec> h;
  for (int r = 0; r <= row; ++r) {
    if (tr.provenance[static_cast<std::size_t>(r)].kind == TokenKind::Obs && keep(r)) {
      h.push_back(payload(tr, r));
    }
  }
  return h;
}

}  // namespace

std::vector<TargetMatrix> ZeroPredictor::predict(std::span<const InterleavedTrace> traces,
                                                 std::span<const std::vector<int>> rows) const {
  check_rows(traces, rows);
  std::vector<TargetMatrix> out;
  out.reserve(traces.size());
  for (const auto& r : rows) out.push_back(TargetMatrix::Zero(static_cast<Eigen::Index>(r.size()), kStateDim));
  return out;
}

std::vector<TargetMatrix> PinvPredictor::predict(std::span<const InterleavedTrace> traces,
                                                 std::span<const std::vector<int>> rows) const {
  check_rows(traces, rows);
  std::vector<TargetMatrix> out;
  out.reserve(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const InterleavedTrace& tr = traces[i];
    // Label governing each row: the most recent open at or before it, cleared by a close.
    std::vector<int> label(static_cast<std::size_t>(tr.length()), -1);
    int current = -1;
    for (int r = 0; r < tr.length(); ++r) {
      const Provenance& p = tr.provenance[static_cast<std::size_t>(r)];
      if (p.kind == TokenKind::Open) current = p.pair;
      label[static_cast<std::size_t>(r)] = current;
      if (p.kind == TokenKind::Close) current = -1;
    }
    TargetMatrix m = TargetMatrix::Zero(static_cast<Eigen::Index>(rows[i].size()), kStateDim);
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      const int row = rows[i][j];
      const int lab = label[static_cast<std::size_t>(row)];
      if (lab < 0 || tr.provenance[static_cast<std::size_t>(row)].kind == TokenKind::Close) continue;
      const auto h = history_upto(tr, row, [&](int r) { return label[static_cast<std::size_t>(r)] == lab; });
      m.row(static_cast<Eigen::Index>(j)) = pinv_predict(h).transpose();
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<TargetMatrix> PerfectRecallPredictor::predict(std::span<const InterleavedTrace> traces,
                                                          std::span<const std::vector<int>> rows) const {
  check_rows(traces, rows);
  std::vector<TargetMatrix> out;
  out.reserve(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const InterleavedTrace& tr = traces[i];
    TargetMatrix m = TargetMatrix::Zero(static_cast<Eigen::Index>(rows[i].size()), kStateDim);
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      const int row = rows[i][j];
      if (row + 1 >= tr.length()) continue;
      const Provenance& next = tr.provenance[static_cast<std::size_t>(row) + 1];
      if (next.kind != TokenKind::Obs) continue;
      const auto h = history_upto(tr, row, [&](int r) {
        return tr.provenance[static_cast<std::size_t>(r)].slot == next.slot;
      });
      m.row(static_cast<Eigen::Index>(j)) = pinv_predict(h).transpose();
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<TargetMatrix> ModelPredictor::predict(std::span<const InterleavedTrace> traces,
                                                  std::span<const std::vector<int>> rows) const {
  check_rows(traces, rows);
  std::vector<TargetMatrix> out(traces.size());
  std::size_t first = 0;
  while (first < traces.size()) {
    // Group consecutive traces of equal length, at most batch_ per forward.
    const int seq = traces[first].length();
    std::size_t last = first + 1;
    while (last < traces.size() && last - first < static_cast<std::size_t>(batch_) &&
           traces[last].length() == seq) {
      ++last;
    }
    const auto count = static_cast<int>(last - first);
    ad::Matrix<float> tokens(static_cast<Eigen::Index>(count) * seq, kTokenDim);
    for (int b = 0; b < count; ++b) {
      tokens.middleRows(static_cast<Eigen::Index>(b) * seq, seq) =
          traces[first + static_cast<std::size_t>(b)].tokens.cast<float>();
    }
    const ad::Matrix<float> pred = model_->predict(tokens, count, seq);
    for (int b = 0; b < count; ++b) {
      const auto& want = rows[first + static_cast<std::size_t>(b)];
      TargetMatrix m(static_cast<Eigen::Index>(want.size()), kStateDim);
      for (std::size_t j = 0; j < want.size(); ++j) {
        m.row(static_cast<Eigen::Index>(j)) =
            pred.row(static_cast<Eigen::Index>(b) * seq + want[j]).cast<double>();
      }
      out[first + static_cast<std::size_t>(b)] = std::move(m);
    }
    first = last;
  }
  return out;
}

}  // namespace ilts
