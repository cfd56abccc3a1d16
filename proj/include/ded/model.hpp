#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace ded {

/// Period length K, dead time D and horizon T, all in bins.
struct ModelDims {
    std::int64_t K = 1;
    std::int64_t D = 0;
    std::int64_t T = 0;

    ModelDims() = default;
    /// Throws DomainError unless K >= 1, D >= 0, T >= 0.
    ModelDims(std::int64_t period, std::int64_t dead_time, std::int64_t horizon);

    /// Number of complete periods in the horizon.
    std::int64_t L() const noexcept { return T / K; }

    ModelDims with_horizon(std::int64_t horizon) const { return {K, D, horizon}; }

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Phasewise rates lambda_r, detection probabilities p_r = 1 - exp(-lambda_r)
/// and the rate gradients at one parameter value.
struct PhaseRates {
    std::vector<double> lambda;
    std::vector<double> p;
    /// K x d, row r is grad lambda_r.
    Eigen::MatrixXd grad_lambda;
    /// Optional per-phase Hessians of lambda_r (d x d each). Empty when the
    /// caller did not request curvature.
    std::vector<Eigen::MatrixXd> hess_lambda;
    /// Parameter at which the rates were evaluated (may be empty).
    Eigen::VectorXd theta;

    std::int64_t K() const noexcept { return static_cast<std::int64_t>(lambda.size()); }
    int dim() const noexcept { return static_cast<int>(grad_lambda.cols()); }

    /// Builds p from lambda and checks 0 < p_r < 1. Throws DomainError.
    static PhaseRates from_lambda(std::vector<double> lambda, Eigen::MatrixXd grad_lambda);
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const noexcept { return x >= lo && x <= hi; }
    double clamp(double x) const noexcept { return x < lo ? lo : (x > hi ? hi : x); }
};

/// Axis-aligned parameter box.
using ParameterBox = std::vector<Interval>;

/// theta -> PhaseRates over a closed parameter box.
class RateModel {
public:
    virtual ~RateModel() = default;

    virtual std::int64_t period() const = 0;
    virtual int dim() const = 0;
    virtual const ParameterBox& box() const = 0;

    /// Evaluates without the box check. Optimizers working in unconstrained
    /// coordinates use this.
    virtual PhaseRates evaluate_unchecked(const Eigen::VectorXd& theta,
                                          bool with_hessian = false) const = 0;

    virtual bool in_box(const Eigen::VectorXd& theta) const;

    /// Throws DomainError when theta is outside the box.
    PhaseRates evaluate(const Eigen::VectorXd& theta, bool with_hessian = false) const;
};

/// Gate and detection bits of one simulated acquisition.
struct Trajectory {
    ModelDims dims;
    std::vector<std::uint8_t> gates;
    std::vector<std::uint8_t> detections;
    std::uint64_t seed = 0;
};

/// Phasewise active-bin counts N_r and detection counts S_r.
///
/// Counts are stored as doubles: observed data always holds exact integers,
/// but likelihood code is also exercised on real-valued expected counts.
struct SufficientStats {
    ModelDims dims;
    std::vector<double> N;
    std::vector<double> S;

    SufficientStats() = default;
    explicit SufficientStats(const ModelDims& d)
        : dims(d), N(static_cast<std::size_t>(d.K), 0.0), S(static_cast<std::size_t>(d.K), 0.0) {}

    std::int64_t K() const noexcept { return dims.K; }

    friend bool operator==(const SufficientStats&, const SufficientStats&) = default;
};

}  // namespace ded
