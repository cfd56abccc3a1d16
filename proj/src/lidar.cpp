#include "ded/lidar.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ded/errors.hpp"

namespace ded {

double wrap_phase(double x, double K) {
    double w = x - K * std::floor(x / K);
    if (w >= K) w -= K;  // x slightly below a multiple of K
    return w;
}

double circular_distance(double x, double y, double K) {
    const double d = std::fmod(std::abs(x - y), K);
    return std::min(d, K - d);
}

ThetaBox ThetaBox::defaults(std::int64_t K) {
    const double Kd = static_cast<double>(K);
    return {{1e-3, 1e3}, {0.0, Kd}, {1e-6, 1.0}};
}

LidarRateModel::LidarRateModel(std::shared_ptr<const PulseTemplate> pulse, ThetaBox box)
    : pulse_(std::move(pulse)), theta_box_(box), box_(box.as_parameter_box()) {
    if (!pulse_) throw DomainError("lidar model needs a pulse template");
    auto bad = [](const Interval& i) { return !(i.lo <= i.hi) || !std::isfinite(i.lo) || !std::isfinite(i.hi); };
    if (bad(box.amplitude) || bad(box.delay) || bad(box.background))
        throw DomainError("malformed parameter box");
    if (!(box.amplitude.lo > 0.0)) throw DomainError("amplitude lower bound must be positive");
    if (!(box.background.lo > 0.0)) throw DomainError("background lower bound must be positive");
    if (box.delay.lo < 0.0 || box.delay.hi > static_cast<double>(pulse_->period()))
        throw DomainError("delay interval must lie within [0, K]");
}

PhaseRates LidarRateModel::evaluate_unchecked(const Eigen::VectorXd& theta,
                                              bool with_hessian) const {
    if (theta.size() != 3) throw DomainError("lidar theta must have 3 coordinates");
    const double a = theta[kAmp], tau = theta[kTau], b = theta[kBg];
    const std::int64_t K = period();
    const auto Ku = static_cast<std::size_t>(K);

    // density(tau - r) for r = -1..K-1; f(tau - r + 1) is the previous entry.
    std::vector<double> dens(Ku + 1);
    for (std::int64_t r = -1; r < K; ++r)
        dens[static_cast<std::size_t>(r + 1)] = pulse_->density(tau - static_cast<double>(r));
    std::vector<double> dens_slope;
    if (with_hessian) {
        dens_slope.resize(Ku + 1);
        for (std::int64_t r = -1; r < K; ++r)
            dens_slope[static_cast<std::size_t>(r + 1)] =
                pulse_->density_derivative(tau - static_cast<double>(r));
    }

    std::vector<double> lambda(Ku);
    Eigen::MatrixXd grad(K, 3);
    for (std::size_t r = 0; r < Ku; ++r) {
        const double f = pulse_->binned(tau, static_cast<std::int64_t>(r));
        const double df = dens[r] - dens[r + 1];
        lambda[r] = a * f + b;
        grad(static_cast<Eigen::Index>(r), kAmp) = f;
        grad(static_cast<Eigen::Index>(r), kTau) = a * df;
        grad(static_cast<Eigen::Index>(r), kBg) = 1.0;
    }
    PhaseRates rates = PhaseRates::from_lambda(std::move(lambda), std::move(grad));
    rates.theta = theta;
    if (with_hessian) {
        rates.hess_lambda.assign(Ku, Eigen::MatrixXd::Zero(3, 3));
        for (std::size_t r = 0; r < Ku; ++r) {
            const double df = dens[r] - dens[r + 1];
            const double d2f = dens_slope[r] - dens_slope[r + 1];
            auto& H = rates.hess_lambda[r];
            H(kAmp, kTau) = H(kTau, kAmp) = df;
            H(kTau, kTau) = a * d2f;
        }
    }
    return rates;
}

Eigen::VectorXd LidarRateModel::project(const Eigen::VectorXd& theta, bool* clamped) const {
    const double K = static_cast<double>(period());
    Eigen::VectorXd out = theta;
    bool moved = false;
    auto clamp = [&](Eigen::Index i, const Interval& iv) {
        const double c = iv.clamp(out[i]);
        if (c != out[i]) moved = true;
        out[i] = c;
    };
    clamp(kAmp, theta_box_.amplitude);
    clamp(kBg, theta_box_.background);
    out[kTau] = wrap_phase(theta[kTau], K);
    if (!theta_box_.full_circle(K) && !theta_box_.delay.contains(out[kTau])) {
        const double to_lo = circular_distance(out[kTau], theta_box_.delay.lo, K);
        const double to_hi = circular_distance(out[kTau], theta_box_.delay.hi, K);
        out[kTau] = to_lo <= to_hi ? theta_box_.delay.lo : theta_box_.delay.hi;
        moved = true;
    }
    if (clamped) *clamped = moved;
    return out;
}

PhaseRates misspecified_rates(const Eigen::VectorXd& theta0, const Bump& bump,
                              const LidarRateModel& model) {
    if (bump.height < 0.0)
        throw DomainError("bump height must be nonnegative, got " + std::to_string(bump.height));
    PhaseRates nominal = model.evaluate_unchecked(theta0);
    if (bump.height == 0.0) return nominal;
    const WrappedGaussian shape(bump.sigma, model.period());
    std::vector<double> u = shape.binned_profile(bump.centre);
    const double peak = *std::max_element(u.begin(), u.end());
    std::vector<double> lambda = nominal.lambda;
    for (std::size_t r = 0; r < lambda.size(); ++r) lambda[r] += bump.height * u[r] / peak;
    PhaseRates rates = PhaseRates::from_lambda(std::move(lambda), std::move(nominal.grad_lambda));
    rates.theta = theta0;
    return rates;
}

}  // namespace ded
