#pragma once

#include <functional>
#include <string_view>

#include <Eigen/Dense>

namespace ded {

/// f(x), writing the gradient into `grad`. May return a non-finite value
/// outside its domain; the line search then backs off.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsSettings {
    int max_evals = 1000;
    double xtol_rel = 1e-8;  // stop when every |dx_i| <= xtol_rel * |x_i|
    double ftol_rel = 1e-10; // stop when |df| <= ftol_rel * |f|, or when every
                             // |g_i| max(|x_i|, 1) <= ftol_rel * max(|f|, 1)
    int memory = 6;
};

enum class LbfgsStop { gradient_zero, xtol, ftol, max_evals, line_search_failed };
std::string_view to_string(LbfgsStop stop) noexcept;

struct LbfgsResult {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd grad;
    int evals = 0;
    LbfgsStop stop = LbfgsStop::max_evals;
    bool converged() const noexcept {
        return stop == LbfgsStop::gradient_zero || stop == LbfgsStop::xtol || stop == LbfgsStop::ftol;
    }
};

/// Limited-memory BFGS minimisation with a strong-Wolfe line search (cubic
/// interpolation in the zoom phase). The returned f is never above f(x0).
/// Throws DomainError if f(x0) is not finite.
LbfgsResult minimize_lbfgs(const Objective& f, const Eigen::VectorXd& x0,
                           const LbfgsSettings& settings = {});

}  // namespace ded
