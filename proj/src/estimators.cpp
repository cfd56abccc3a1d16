#include "ded/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include "ded/errors.hpp"
#include "ded/lbfgs.hpp"

namespace ded {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

LbfgsSettings lbfgs_settings(const OptimizerSettings& s) {
    if (s.max_evals < 1 || !(s.rel_param_tol > 0.0) || !(s.rel_obj_tol > 0.0))
        throw ConfigError("optimizer settings must be positive");
    LbfgsSettings out;
    out.max_evals = s.max_evals;
    out.xtol_rel = s.rel_param_tol;
    out.ftol_rel = s.rel_obj_tol;
    return out;
}

// theta = (exp(e0), offset + K sigmoid(e1), exp(e2)); tau is left unwrapped
// because the rates are K-periodic in tau anyway.
struct LatentMap {
    double K = 1.0;
    double offset = 0.0;

    Eigen::VectorXd theta(const Eigen::VectorXd& eta) const {
        return lidar_theta(std::exp(eta[0]), offset + K * sigmoid(eta[1]), std::exp(eta[2]));
    }
    Eigen::VectorXd jacobian(const Eigen::VectorXd& eta) const {
        const double s = sigmoid(eta[1]);
        Eigen::VectorXd j(3);
        j << std::exp(eta[0]), K * s * (1.0 - s), std::exp(eta[2]);
        return j;
    }
    Eigen::VectorXd eta(const Eigen::VectorXd& theta) const {
        // Keep tau' strictly inside (0, K) so the logit stays finite.
        const double u = std::clamp(wrap_phase(theta[kTau] - offset, K) / K, 1e-12, 1.0 - 1e-12);
        Eigen::VectorXd e(3);
        e << std::log(theta[kAmp]), std::log(u / (1.0 - u)), std::log(theta[kBg]);
        return e;
    }
};

// Log-likelihood and score, or nothing if the rates leave (0, 1).
bool evaluate_likelihood(const SufficientStats& stats, const LidarRateModel& model,
                         const Eigen::VectorXd& theta, double& ll, Eigen::VectorXd* u) {
    PhaseRates rates;
    try {
        rates = model.evaluate_unchecked(theta);
    } catch (const DomainError&) {
        return false;
    }
    ll = log_likelihood(stats, rates);
    if (u) *u = score(stats, rates);
    return std::isfinite(ll);
}

EstimateStatus from_stop(const LbfgsResult& r) {
    return r.stop == LbfgsStop::max_evals ? EstimateStatus::max_evals : EstimateStatus::converged;
}

}  // namespace

std::string_view to_string(EstimateStatus status) noexcept {
    switch (status) {
        case EstimateStatus::converged: return "converged";
        case EstimateStatus::max_evals: return "max-evals";
        case EstimateStatus::fisher_singular_fallback: return "fisher-singular-fallback";
        case EstimateStatus::projected_to_box: return "projected-to-box";
    }
    return "unknown";
}

std::string EstimateReport::to_json(int indent) const {
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::ordered_json j;
    j["method"] = method;
    j["theta"] = vec(theta);
    j["pilot"] = pilot ? nlohmann::ordered_json(vec(*pilot)) : nlohmann::ordered_json(nullptr);
    j["status"] = std::string(to_string(status));
    j["evals"] = evals;
    if (fisher) {
        std::vector<double> rows;
        for (Eigen::Index r = 0; r < fisher->matrix.rows(); ++r)
            for (Eigen::Index c = 0; c < fisher->matrix.cols(); ++c) rows.push_back(fisher->matrix(r, c));
        j["fisher"] = rows;
    } else {
        j["fisher"] = nullptr;
    }
    j["bound"] = bound ? nlohmann::ordered_json(*bound) : nlohmann::ordered_json(nullptr);
    return j.dump(indent);
}

RateEstimates rate_estimates(const SufficientStats& stats) {
    RateEstimates est;
    est.p_hat.resize(stats.N.size());
    est.lambda_hat.resize(stats.N.size());
    for (std::size_t r = 0; r < stats.N.size(); ++r) {
        const double p = (stats.S[r] + 0.5) / (stats.N[r] + 1.0);
        est.p_hat[r] = p;
        est.lambda_hat[r] = -std::log1p(-p);
    }
    return est;
}

double lower_median(std::vector<double> values) {
    if (values.empty()) throw DomainError("median of an empty set");
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
    std::nth_element(values.begin(), mid, values.end());
    return *mid;
}

EstimateReport fourier_pilot(const RateEstimates& est, const LidarRateModel& model) {
    const std::int64_t K = model.period();
    if (est.K() != K) throw DomainError("rate estimates and model differ in K");
    const std::complex<double> d1 = model.pulse().fourier(1);
    if (std::abs(d1) < 1e-14)
        throw DegenerateTemplateError("first binned Fourier coefficient of the pulse vanishes");
    const double Kd = static_cast<double>(K);
    double m0 = 0.0;
    std::complex<double> m1 = 0.0;
    for (std::int64_t r = 0; r < K; ++r) {
        const double l = est.lambda_hat[static_cast<std::size_t>(r)];
        m0 += l;
        m1 += l * std::polar(1.0, 2.0 * kPi * static_cast<double>(r) / Kd);
    }
    m0 /= Kd;
    m1 /= Kd;
    const double a = std::abs(m1) / std::abs(d1);
    double phase = std::arg(m1 / d1);
    if (phase < 0.0) phase += 2.0 * kPi;
    const double tau = wrap_phase(Kd * phase / (2.0 * kPi), Kd);
    const double b = m0 - a / Kd;

    EstimateReport rep;
    rep.method = "fourier";
    bool clamped = false;
    rep.theta = model.project(lidar_theta(a, tau, b), &clamped);
    rep.status = clamped ? EstimateStatus::projected_to_box : EstimateStatus::converged;
    return rep;
}

EstimateReport robust_pilot(const RateEstimates& est, const LidarRateModel& model) {
    const std::int64_t K = model.period();
    if (est.K() != K) throw DomainError("rate estimates and model differ in K");
    if (K < 3) throw DomainError("robust pilot needs K >= 3");
    const auto Ku = static_cast<std::size_t>(K);

    const double b0 = lower_median(est.lambda_hat);
    std::vector<std::complex<double>> J(Ku), g(Ku);
    const std::vector<double> f0 = model.pulse().binned_profile(0.0);
    for (std::size_t r = 0; r < Ku; ++r) {
        J[r] = est.lambda_hat[r] - b0;
        g[r] = f0[r];
    }
    // C_j = sum_r J_r f_0(r - j): circular cross-correlation.
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> Jf, gf, C;
    fft.fwd(Jf, J);
    fft.fwd(gf, g);
    for (std::size_t k = 0; k < Ku; ++k) Jf[k] *= std::conj(gf[k]);
    fft.inv(C, Jf);
    std::size_t best = 0;
    for (std::size_t j = 1; j < Ku; ++j)
        if (C[j].real() > C[best].real()) best = j;
    const double tau = static_cast<double>(best);

    const std::vector<double> f = model.pulse().binned_profile(tau);
    double num = 0.0, den = 0.0;
    for (std::size_t r = 0; r < Ku; ++r) {
        num += J[r].real() * f[r];
        den += f[r] * f[r];
    }
    const double a = std::max(0.0, num / den);
    std::vector<double> resid(Ku);
    for (std::size_t r = 0; r < Ku; ++r) resid[r] = est.lambda_hat[r] - a * f[r];
    const double b = lower_median(std::move(resid));

    EstimateReport rep;
    rep.method = "robust";
    bool clamped = false;
    rep.theta = model.project(lidar_theta(a, tau, b), &clamped);
    rep.status = clamped ? EstimateStatus::projected_to_box : EstimateStatus::converged;
    return rep;
}

double coates_max_bin(const RateEstimates& est) {
    if (est.lambda_hat.empty()) throw DomainError("empty rate estimates");
    const auto it = std::max_element(est.lambda_hat.begin(), est.lambda_hat.end());
    return static_cast<double>(it - est.lambda_hat.begin());
}

double quadratic_peak_fit(const RateEstimates& est) {
    const std::int64_t K = est.K();
    if (K < 3) throw DomainError("quadratic peak fit needs K >= 3");
    const auto m = static_cast<std::int64_t>(coates_max_bin(est));
    const double left = est.lambda_hat[static_cast<std::size_t>((m + K - 1) % K)];
    const double centre = est.lambda_hat[static_cast<std::size_t>(m)];
    const double right = est.lambda_hat[static_cast<std::size_t>((m + 1) % K)];
    const double curvature = left - 2.0 * centre + right;
    if (!(curvature < 0.0)) return static_cast<double>(m);
    const double offset = (left - right) / (2.0 * curvature);
    return wrap_phase(static_cast<double>(m) + offset, static_cast<double>(K));
}

EstimateReport mle(const SufficientStats& stats, const LidarRateModel& model,
                   const Eigen::VectorXd& init, const OptimizerSettings& settings) {
    const double K = static_cast<double>(model.period());
    double ll0 = 0.0;
    if (!evaluate_likelihood(stats, model, init, ll0, nullptr))
        throw DomainError("log-likelihood is not finite at the initial point");

    LatentMap map{K, 0.0};
    const double tau0 = wrap_phase(init[kTau], K);
    if (std::min(tau0, K - tau0) < 3.0 * model.pulse().width()) map.offset = wrap_phase(tau0 - 0.5 * K, K);

    const Objective objective = [&](const Eigen::VectorXd& eta, Eigen::VectorXd& grad) {
        const Eigen::VectorXd theta = map.theta(eta);
        double ll = 0.0;
        Eigen::VectorXd u;
        if (!evaluate_likelihood(stats, model, theta, ll, &u)) return kInf;
        grad = -(u.array() * map.jacobian(eta).array()).matrix();
        return -ll;
    };
    const LbfgsResult res = minimize_lbfgs(objective, map.eta(init), lbfgs_settings(settings));

    EstimateReport rep;
    rep.method = "mle";
    rep.pilot = init;
    rep.evals = res.evals;
    bool clamped = false;
    rep.theta = model.project(map.theta(res.x), &clamped);
    rep.status = clamped ? EstimateStatus::projected_to_box : from_stop(res);
    // Projection can cost likelihood; never report less than the start.
    double ll = 0.0;
    if (!evaluate_likelihood(stats, model, rep.theta, ll, nullptr) || ll < ll0) {
        rep.theta = model.project(init);
    }
    return rep;
}

NewtonStep one_step_update(const SufficientStats& stats, const PhaseRates& rates,
                           std::span<const double> gamma) {
    NewtonStep step;
    step.theta = rates.theta;
    const FisherInfo info = information_rate(rates, gamma);
    step.condition_number = condition_number(info.matrix);
    if (!(step.condition_number <= 1e12) || stats.dims.T <= 0) {
        step.singular = true;
        return step;
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(info.matrix);
    if (llt.info() != Eigen::Success) {
        step.singular = true;
        return step;
    }
    const Eigen::VectorXd u = score(stats, rates);
    step.theta = rates.theta + llt.solve(u) / static_cast<double>(stats.dims.T);
    return step;
}

EstimateReport one_step(const SufficientStats& stats, const LidarRateModel& model,
                        const Eigen::VectorXd& pilot, const GatingFrequencies& gamma_hat) {
    const PhaseRates rates = model.evaluate(pilot);
    const NewtonStep step = one_step_update(stats, rates, gamma_hat.gamma);
    EstimateReport rep;
    rep.method = "one-step";
    rep.pilot = pilot;
    if (step.singular) {
        rep.theta = model.project(pilot);
        rep.status = EstimateStatus::fisher_singular_fallback;
        return rep;
    }
    bool clamped = false;
    rep.theta = model.project(step.theta, &clamped);
    rep.status = clamped ? EstimateStatus::projected_to_box : EstimateStatus::converged;
    return rep;
}

EstimateReport fill_amplitude_background(const SufficientStats& stats, const LidarRateModel& model,
                                         double tau_fixed, const OptimizerSettings& settings) {
    const std::int64_t K = model.period();
    if (!(tau_fixed >= 0.0 && tau_fixed < static_cast<double>(K)))
        throw DomainError("fixed delay must lie in [0, K)");
    const ThetaBox& box = model.theta_box();

    // Start from the median background and the projected amplitude.
    const RateEstimates est = rate_estimates(stats);
    const std::vector<double> f = model.pulse().binned_profile(tau_fixed);
    const double b_start = box.background.clamp(lower_median(est.lambda_hat));
    double num = 0.0, den = 0.0;
    for (std::size_t r = 0; r < f.size(); ++r) {
        num += (est.lambda_hat[r] - b_start) * f[r];
        den += f[r] * f[r];
    }
    const double a_start = box.amplitude.clamp(num / den);

    auto full = [&](const Eigen::VectorXd& e) {
        return lidar_theta(std::exp(e[0]), tau_fixed, std::exp(e[1]));
    };
    const Objective objective = [&](const Eigen::VectorXd& e, Eigen::VectorXd& grad) {
        double ll = 0.0;
        Eigen::VectorXd u;
        if (!evaluate_likelihood(stats, model, full(e), ll, &u)) return kInf;
        grad.resize(2);
        grad << -u[kAmp] * std::exp(e[0]), -u[kBg] * std::exp(e[1]);
        return -ll;
    };
    Eigen::VectorXd e0(2);
    e0 << std::log(a_start), std::log(b_start);
    const LbfgsResult res = minimize_lbfgs(objective, e0, lbfgs_settings(settings));

    EstimateReport rep;
    rep.method = "fill";
    rep.evals = res.evals;
    bool clamped = false;
    rep.theta = model.project(full(res.x), &clamped);
    rep.status = clamped ? EstimateStatus::projected_to_box : from_stop(res);
    return rep;
}

}  // namespace ded
