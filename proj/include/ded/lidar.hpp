#pragma once

#include <memory>

#include "ded/model.hpp"
#include "ded/pulse.hpp"

namespace ded {

// Coordinates of the lidar parameter theta = (a, tau, b).
inline constexpr Eigen::Index kAmp = 0;
inline constexpr Eigen::Index kTau = 1;
inline constexpr Eigen::Index kBg = 2;

inline Eigen::VectorXd lidar_theta(double a, double tau, double b) {
    Eigen::VectorXd theta(3);
    theta << a, tau, b;
    return theta;
}

/// Circular distance on the period-K circle.
double circular_distance(double x, double y, double K);

/// Reduces x into [0, K).
double wrap_phase(double x, double K);

/// Box [a-, a+] x [tau-, tau+] x [b-, b+] with a- > 0 and b- > 0. The delay
/// interval [0, K] is read as the whole circle.
struct ThetaBox {
    Interval amplitude;
    Interval delay;
    Interval background;

    /// Wide default box for period K.
    static ThetaBox defaults(std::int64_t K);

    bool full_circle(double K) const noexcept { return delay.lo <= 0.0 && delay.hi >= K; }
    ParameterBox as_parameter_box() const { return {amplitude, delay, background}; }
};

/// lambda_r(theta) = a f_tau(r) + b with gradient
/// v_r = (f_tau(r), a (f(tau - r + 1) - f(tau - r)), 1).
class LidarRateModel final : public RateModel {
public:
    /// Throws DomainError if the box is malformed (a- <= 0, b- <= 0, empty
    /// intervals).
    LidarRateModel(std::shared_ptr<const PulseTemplate> pulse, ThetaBox box);

    std::int64_t period() const override { return pulse_->period(); }
    int dim() const override { return 3; }
    const ParameterBox& box() const override { return box_; }
    const ThetaBox& theta_box() const noexcept { return theta_box_; }
    const PulseTemplate& pulse() const noexcept { return *pulse_; }
    std::shared_ptr<const PulseTemplate> pulse_ptr() const noexcept { return pulse_; }

    PhaseRates evaluate_unchecked(const Eigen::VectorXd& theta,
                                  bool with_hessian = false) const override;

    /// Componentwise projection onto the box; tau is first reduced modulo K
    /// and, for a partial delay interval, moved to the circularly nearer end.
    /// Sets `clamped` when any coordinate had to move (wrapping alone does
    /// not count).
    Eigen::VectorXd project(const Eigen::VectorXd& theta, bool* clamped = nullptr) const;

private:
    std::shared_ptr<const PulseTemplate> pulse_;
    ThetaBox theta_box_;
    ParameterBox box_;
};

/// Phasewise rates at theta; throws DomainError outside the box.
inline PhaseRates lidar_rates(const LidarRateModel& model, const Eigen::VectorXd& theta) {
    return model.evaluate(theta);
}

/// Localized background bump added to a nominal profile.
struct Bump {
    double height = 0.0;  // h
    double sigma = 1.0;   // sigma_b, bins
    double centre = 0.0;  // tau_b, bins
};

/// lambda_r = a0 f_tau0(r) + b0 + h u(r), u the binned wrapped-Gaussian bump
/// at tau_b scaled to unit peak. Gradients are the nominal model's; the
/// profile is meant for data synthesis only. Throws DomainError if h < 0.
PhaseRates misspecified_rates(const Eigen::VectorXd& theta0, const Bump& bump,
                              const LidarRateModel& model);

}  // namespace ded
