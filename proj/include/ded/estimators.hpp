#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ded/inference.hpp"
#include "ded/lidar.hpp"

namespace ded {

/// Regularised detection frequencies p_r = (S_r + 1/2) / (N_r + 1) and the
/// corrected intensities lambda_r = -log(1 - p_r).
struct RateEstimates {
    std::vector<double> p_hat;
    std::vector<double> lambda_hat;
    std::int64_t K() const noexcept { return static_cast<std::int64_t>(lambda_hat.size()); }
};

struct OptimizerSettings {
    int max_evals = 1000;
    double rel_param_tol = 1e-8;
    double rel_obj_tol = 1e-10;
};

enum class EstimateStatus { converged, max_evals, fisher_singular_fallback, projected_to_box };
std::string_view to_string(EstimateStatus status) noexcept;

struct EstimateReport {
    Eigen::VectorXd theta;  // (a, tau, b), inside the box, tau in [0, K)
    std::string method;
    std::optional<Eigen::VectorXd> pilot;
    std::optional<FisherInfo> fisher;
    std::optional<double> bound;
    EstimateStatus status = EstimateStatus::converged;
    int evals = 0;

    /// JSON object: method, theta, pilot, status, evals, fisher (row-major),
    /// bound.
    std::string to_json(int indent = 2) const;
};

RateEstimates rate_estimates(const SufficientStats& stats);

/// Lower median (element K/2 - 1 of the sorted values for even K).
double lower_median(std::vector<double> values);

/// Inverts the zeroth and first Fourier modes of lambda_hat. Throws
/// DegenerateTemplateError if |d_1| < 1e-14.
EstimateReport fourier_pilot(const RateEstimates& est, const LidarRateModel& model);

/// Median-centred circular matched filter (integer delay grid), projection
/// for a, median residual for b.
EstimateReport robust_pilot(const RateEstimates& est, const LidarRateModel& model);

/// argmax_r lambda_hat_r, smallest index on ties.
double coates_max_bin(const RateEstimates& est);

/// Vertex of the parabola through the max bin and its circular neighbours,
/// modulo K; the max bin itself if the curvature is not negative.
double quadratic_peak_fit(const RateEstimates& est);

/// Local maximiser of the log-likelihood from `init`, by L-BFGS in
/// eta = (log a, logit(tau' / K), log b), where tau' is tau measured from a
/// phase origin moved away from init's tau when it lies within 3 pulse
/// widths of the period boundary. Throws DomainError if the likelihood is
/// not finite at init.
EstimateReport mle(const SufficientStats& stats, const LidarRateModel& model,
                   const Eigen::VectorXd& init, const OptimizerSettings& settings = {});

/// Raw Newton correction theta + I(theta; gamma)^{-1} U(theta) / T.
struct NewtonStep {
    Eigen::VectorXd theta;
    bool singular = false;  // condition number above 1e12 or not positive definite
    double condition_number = 0.0;
};
NewtonStep one_step_update(const SufficientStats& stats, const PhaseRates& rates_at_pilot,
                           std::span<const double> gamma);

/// One-step estimator from `pilot`; falls back to the pilot when the
/// information is numerically singular and projects onto the box (tau
/// wrapped modulo K) when the update leaves it.
EstimateReport one_step(const SufficientStats& stats, const LidarRateModel& model,
                        const Eigen::VectorXd& pilot, const GatingFrequencies& gamma_hat);

/// Maximises the likelihood over (a, b) with tau fixed. Returns the full
/// (a, tau, b) in the report.
EstimateReport fill_amplitude_background(const SufficientStats& stats, const LidarRateModel& model,
                                         double tau_fixed, const OptimizerSettings& settings = {});

}  // namespace ded
