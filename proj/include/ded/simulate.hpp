#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ded/gating.hpp"
#include "ded/model.hpp"

namespace ded {

/// Simulates T bins of the dead-time detection process at theta. The policy
/// is reset first. Bernoulli draws happen only in open bins, so the latent
/// outcomes of closed bins are never sampled. Throws DomainError if theta is
/// outside the model's box.
Trajectory simulate(const RateModel& model, const Eigen::VectorXd& theta, GatingPolicy& policy,
                    const ModelDims& dims, std::uint64_t seed);

/// Same process driven directly by phasewise rates (e.g. a misspecified
/// generator with no parameterisation).
Trajectory simulate_rates(const PhaseRates& rates, GatingPolicy& policy, const ModelDims& dims,
                          std::uint64_t seed);

/// Streams the simulation into sufficient statistics without materialising
/// the trajectory. Returns one snapshot per entry of `horizons` (strictly
/// increasing); the random stream is identical to simulate_rates() with
/// T = horizons.back(), so each snapshot equals accumulate_stats() of the
/// corresponding prefix.
std::vector<SufficientStats> simulate_stats(const PhaseRates& rates, GatingPolicy& policy,
                                            const ModelDims& dims,
                                            std::span<const std::int64_t> horizons,
                                            std::uint64_t seed);

SufficientStats accumulate_stats(const Trajectory& traj);

/// True iff Y_t <= G_t everywhere and every detection is followed by D
/// closed bins (truncated at the horizon).
bool check_feasible(const Trajectory& traj);

/// Absolute bin indices of all detections.
std::vector<std::int64_t> detection_bins(const Trajectory& traj);

}  // namespace ded
