#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ded/gating.hpp"
#include "ded/model.hpp"

namespace ded {

/// I(theta; alpha) = (1/K) sum_r alpha_r I_r(theta).
struct FisherInfo {
    Eigen::MatrixXd matrix;
    std::vector<double> alpha;
    Eigen::VectorXd theta;
};

enum class GammaSource { empirical, exact_chain, monte_carlo };
std::string_view to_string(GammaSource source) noexcept;

struct GatingFrequencies {
    std::vector<double> gamma;
    GammaSource provenance = GammaSource::empirical;
};

/// sum_r [S_r log p_r + (N_r - S_r) log(1 - p_r)]; constants dropped.
double log_likelihood(const SufficientStats& stats, const PhaseRates& rates);

/// Gradient of log_likelihood in theta: sum_r (S_r - p_r N_r) / p_r grad lambda_r.
Eigen::VectorXd score(const SufficientStats& stats, const PhaseRates& rates);

/// I_r = ((1 - p_r) / p_r) grad lambda_r grad lambda_r^T.
Eigen::MatrixXd phase_fisher(const PhaseRates& rates, std::int64_t r);

/// Throws DomainError if alpha has the wrong length or entries outside [0, 1].
FisherInfo information_rate(const PhaseRates& rates, std::span<const double> alpha);

/// gamma_r = N_r / L clamped to [0, 1]. Throws InsufficientDataError if L = 0.
GatingFrequencies empirical_gating_frequencies(const SufficientStats& stats);

/// Stationary gating frequencies of the period-sampled dead-time timer chain.
GatingFrequencies exact_gating_frequencies(const PhaseRates& rates, PolicyKind policy,
                                           std::int64_t dead_time);

/// One-period transition matrix of the timer sampled at period starts,
/// states {0, ..., D}. Exposed for tests.
Eigen::MatrixXd period_transition_matrix(const PhaseRates& rates, PolicyKind policy,
                                         std::int64_t dead_time);

/// trace(W I^{-1}) by Cholesky solve. Throws ConditioningError (with the
/// smallest eigenvalue) if the matrix is not numerically positive definite.
double fisher_lower_bound(const FisherInfo& info, const Eigen::MatrixXd& W);

/// Ratio of extreme eigenvalues of a symmetric matrix (inf if the smallest
/// is <= 0).
double condition_number(const Eigen::MatrixXd& symmetric);

/// Single-bin log-mass m_r(y), score s_r(y) and Hessian J_r(y). J needs
/// rates.hess_lambda; without it the curvature term is omitted.
struct BinDerivatives {
    double m = 0.0;
    Eigen::VectorXd s;
    Eigen::MatrixXd J;
};
BinDerivatives per_bin_derivatives(bool y, const PhaseRates& rates, std::int64_t r);

/// Bound at one parameter for gamma and for alpha = 1.
struct BoundReport {
    Eigen::VectorXd theta;
    std::vector<double> gamma;
    Eigen::MatrixXd fisher;
    double bound = 0.0;
    double bound_dead_time_free = 0.0;
    double condition_number = 0.0;

    double ratio() const { return bound_dead_time_free / bound; }
    /// JSON object: theta, gamma, fisher (row-major), bound,
    /// bound_dead_time_free, ratio, condition_number.
    std::string to_json(int indent = 2) const;
};

BoundReport bound_report(const PhaseRates& rates, const GatingFrequencies& gamma,
                         const Eigen::MatrixXd& W);

}  // namespace ded
