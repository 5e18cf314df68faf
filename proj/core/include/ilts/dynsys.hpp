#pragma once

// Linear dynamical systems: Haar-orthogonal and identity families, rollouts,
// and the exact / pseudoinverse least-squares baselines.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ilts/common.hpp"

namespace ilts {

enum class Family : std::uint8_t { Orthogonal = 0, Identity = 1 };

std::string_view family_name(Family family);
Family parse_family(std::string_view name);

struct SystemMatrix {
  StateMat entries = StateMat::Identity();
  Family family = Family::Identity;
};

struct StateSequence {
  std::vector<StateVec> states;
  std::size_t system_id = 0;
};

struct PredictorEstimate {
  StateMat u_hat = StateMat::Zero();
  std::size_t n_obs = 0;
};

// Orthogonal draws use QR of an iid standard-normal matrix with the columns of
// Q multiplied by sign(diag R), which is Haar on O(5).
SystemMatrix sample_system(Rng& rng, Family family);

// x0 ~ N(0, I/5).
StateVec sample_initial_state(Rng& rng);

// y = U x with a fixed left-to-right summation order (bit-reproducible).
StateVec apply(const StateMat& u, const StateVec& x);
StateVec apply_transposed(const StateMat& u, const StateVec& x);

StateSequence rollout(const SystemMatrix& u, const StateVec& x0, std::size_t length,
                      std::size_t system_id = 0);

// Recovers U = [x1..x5][x0..x4]^-1 from the first six states. Throws
// Errc::SingularStack when sigma_min < 1e-10 * sigma_max.
SystemMatrix exact_solve(std::span<const StateVec> states);

// U_hat = [x1..xi][x0..x_{i-1}]^+ computed through an SVD with singular values
// below 1e-12 * sigma_max truncated.
PredictorEstimate pinv_estimate(std::span<const StateVec> history);

// Predicts x_{i+1} = U_hat x_i. With a single observation no pair exists and
// the prior mean (zero) is returned.
StateVec pinv_predict(std::span<const StateVec> history);

inline constexpr double kPinvRcond = 1e-12;
inline constexpr double kExactSolveRcond = 1e-10;

}  // namespace ilts
