#include "ded/model.hpp"

#include <cmath>
#include <string>

#include "ded/errors.hpp"

namespace ded {

ModelDims::ModelDims(std::int64_t period, std::int64_t dead_time, std::int64_t horizon)
    : K(period), D(dead_time), T(horizon) {
    if (K < 1) throw DomainError("period K must be >= 1, got " + std::to_string(K));
    if (D < 0) throw DomainError("dead time D must be >= 0, got " + std::to_string(D));
    if (T < 0) throw DomainError("horizon T must be >= 0, got " + std::to_string(T));
}

PhaseRates PhaseRates::from_lambda(std::vector<double> lambda, Eigen::MatrixXd grad_lambda) {
    if (grad_lambda.rows() != static_cast<Eigen::Index>(lambda.size()))
        throw DomainError("gradient rows do not match the number of phases");
    PhaseRates rates;
    rates.p.resize(lambda.size());
    for (std::size_t r = 0; r < lambda.size(); ++r) {
        const double p = -std::expm1(-lambda[r]);
        if (!(p > 0.0 && p < 1.0))
            throw DomainError("detection probability out of (0,1) at phase " + std::to_string(r) +
                              " (lambda = " + std::to_string(lambda[r]) + ")");
        rates.p[r] = p;
    }
    rates.lambda = std::move(lambda);
    rates.grad_lambda = std::move(grad_lambda);
    return rates;
}

bool RateModel::in_box(const Eigen::VectorXd& theta) const {
    const auto& b = box();
    if (theta.size() != static_cast<Eigen::Index>(b.size())) return false;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (!b[i].contains(theta[static_cast<Eigen::Index>(i)])) return false;
    return true;
}

PhaseRates RateModel::evaluate(const Eigen::VectorXd& theta, bool with_hessian) const {
    if (!in_box(theta)) throw DomainError("theta outside the parameter box");
    return evaluate_unchecked(theta, with_hessian);
}

}  // namespace ded
