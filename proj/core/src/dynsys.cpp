#include "ilts/dynsys.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace ilts {

std::string_view family_name(Family family) {
  return family == Family::Orthogonal ? "orthogonal" : "identity";
}

Family parse_family(std::string_view name) {
  if (name == "orthogonal") return Family::Orthogonal;
  if (name == "identity") return Family::Identity;
  throw Error(Errc::InvalidArgument, "unknown family '" + std::string(name) + "'");
}

SystemMatrix sample_system(Rng& rng, Family family) {
  SystemMatrix out;
  out.family = family;
  if (family == Family::Identity) {
    out.entries = StateMat::Identity();
    return out;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  StateMat z;
  for (int r = 0; r < kStateDim; ++r) {
    for (int c = 0; c < kStateDim; ++c) z(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<StateMat> qr(z);
  StateMat q = qr.householderQ();
  const StateMat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int c = 0; c < kStateDim; ++c) {
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  out.entries = q;
  return out;
}

StateVec sample_initial_state(Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / kStateDim));
  StateVec x;
  for (int i = 0; i < kStateDim; ++i) x(i) = normal(rng);
  return x;
}

StateVec apply(const StateMat& u, const StateVec& x) {
  StateVec y;
  for (int r = 0; r < kStateDim; ++r) {
    double acc = 0.0;
    for (int c = 0; c < kStateDim; ++c) acc += u(r, c) * x(c);
    y(r) = acc;
  }
  return y;
}

StateVec apply_transposed(const StateMat& u, const StateVec& x) {
  StateVec y;
  for (int r = 0; r < kStateDim; ++r) {
    double acc = 0.0;
    for (int c = 0; c < kStateDim; ++c) acc += u(c, r) * x(c);
    y(r) = acc;
  }
  return y;
}

StateSequence rollout(const SystemMatrix& u, const StateVec& x0, std::size_t length,
                      std::size_t system_id) {
  if (length == 0) throw Error(Errc::InvalidArgument, "rollout length must be >= 1");
  StateSequence seq;
  seq.system_id = system_id;
  seq.states.reserve(length);
  seq.states.push_back(x0);
  for (std::size_t i = 1; i < length; ++i) {
    if (u.family == Family::Identity) {
      seq.states.push_back(seq.states.back());
    } else {
      seq.states.push_back(apply(u.entries, seq.states.back()));
    }
  }
  return seq;
}

SystemMatrix exact_solve(std::span<const StateVec> states) {
  if (states.size() < kStateDim + 1) {
    throw Error(Errc::InvalidArgument, "exact_solve needs six states");
  }
  StateMat x, y;
  for (int i = 0; i < kStateDim; ++i) {
    x.col(i) = states[static_cast<std::size_t>(i)];
    y.col(i) = states[static_cast<std::size_t>(i) + 1];
  }
  Eigen::JacobiSVD<StateMat> svd(x);
  const auto& sv = svd.singularValues();
  if (!(sv(kStateDim - 1) >= kExactSolveRcond * sv(0)) || sv(0) == 0.0) {
    throw Error(Errc::SingularStack, "state stack is rank deficient");
  }
  // U X = Y  <=>  X^T U^T = Y^T
  const StateMat ut = x.transpose().fullPivLu().solve(y.transpose());
  SystemMatrix out;
  out.entries = ut.transpose();
  out.family = Family::Orthogonal;
  return out;
}

namespace {

using WideMat = Eigen::Matrix<double, kStateDim, Eigen::Dynamic>;

// Returns (U_hat, defined). Pairs are (history[j], history[j+1]).
PredictorEstimate estimate_from(std::span<const StateVec> history) {
  PredictorEstimate est;
  est.n_obs = history.size();
  if (history.size() < 2) return est;
  const auto pairs = static_cast<Eigen::Index>(history.size() - 1);
  WideMat x(kStateDim, pairs), y(kStateDim, pairs);
  for (Eigen::Index j = 0; j < pairs; ++j) {
    x.col(j) = history[static_cast<std::size_t>(j)];
    y.col(j) = history[static_cast<std::size_t>(j) + 1];
  }
  Eigen::JacobiSVD<WideMat> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return est;
  const double cutoff = kPinvRcond * sv(0);
  // X^+ = V S^-1 U^T restricted to the retained singular triplets.
  Eigen::Matrix<double, Eigen::Dynamic, kStateDim> pinv =
      Eigen::Matrix<double, Eigen::Dynamic, kStateDim>::Zero(pairs, kStateDim);
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) <= cutoff) break;
    pinv.noalias() += (svd.matrixV().col(k) / sv(k)) * svd.matrixU().col(k).transpose();
  }
  est.u_hat.noalias() = y * pinv;
  return est;
}

}  // namespace

PredictorEstimate pinv_estimate(std::span<const StateVec> history) {
  return estimate_from(history);
}

StateVec pinv_predict(std::span<const StateVec> history) {
  if (history.size() < 2) return StateVec::Zero();
  const PredictorEstimate est = estimate_from(history);
  return est.u_hat * history.back();
}

}  // namespace ilts
