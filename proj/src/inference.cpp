#include "ded/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "ded/errors.hpp"

namespace ded {
namespace {

void check_same_period(const SufficientStats& stats, const PhaseRates& rates) {
    if (stats.K() != rates.K())
        throw DomainError("stats have K = " + std::to_string(stats.K()) + " but rates have K = " +
                          std::to_string(rates.K()));
}

// (1 - p) / p for p = 1 - exp(-lambda), without cancellation at small lambda.
double odds_weight(double lambda) { return 1.0 / std::expm1(lambda); }

// Timer distribution over {0, ..., D} with the states 1..D in a ring, so one
// bin of free-running evolution costs O(1):
//   q0' = q0 (1 - p) + q1,  qD' = q0 p,  qj' = q(j+1).
class TimerRing {
public:
    explicit TimerRing(std::int64_t D) : buf_(static_cast<std::size_t>(D), 0.0) {}

    void set_point(std::int64_t state) {
        std::fill(buf_.begin(), buf_.end(), 0.0);
        head_ = 0;
        q0_ = 0.0;
        if (state == 0)
            q0_ = 1.0;
        else
            buf_[static_cast<std::size_t>(state - 1)] = 1.0;
    }

    void set(const Eigen::VectorXd& mu) {
        head_ = 0;
        q0_ = mu[0];
        for (std::size_t j = 0; j < buf_.size(); ++j) buf_[j] = mu[static_cast<Eigen::Index>(j + 1)];
    }

    double open() const noexcept { return q0_; }

    void step(double p) {
        if (buf_.empty()) return;  // D = 0: the timer never leaves 0
        const double next = buf_[head_];
        buf_[head_] = q0_ * p;
        head_ = head_ + 1 == buf_.size() ? 0 : head_ + 1;
        q0_ = q0_ * (1.0 - p) + next;
    }

    double at(std::int64_t state) const {
        if (state == 0) return q0_;
        return buf_[(head_ + static_cast<std::size_t>(state - 1)) % buf_.size()];
    }

private:
    std::vector<double> buf_;
    std::size_t head_ = 0;
    double q0_ = 1.0;
};

Eigen::VectorXd stationary_from_zero(const Eigen::MatrixXd& P) {
    const Eigen::Index n = P.rows();
    // States reachable from 0; the chain restricted to them is the closed
    // class carrying the unique stationary law.
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> order{0};
    seen[0] = 1;
    for (std::size_t k = 0; k < order.size(); ++k)
        for (Eigen::Index j = 0; j < n; ++j)
            if (P(order[k], j) > 0.0 && !seen[static_cast<std::size_t>(j)]) {
                seen[static_cast<std::size_t>(j)] = 1;
                order.push_back(j);
            }
    std::sort(order.begin(), order.end());
    const auto m = static_cast<Eigen::Index>(order.size());

    // (P^T - I) mu = 0 with the last equation replaced by sum(mu) = 1.
    Eigen::MatrixXd A(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            A(i, j) = P(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(i)]) -
                      (i == j ? 1.0 : 0.0);
    A.row(m - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rhs[m - 1] = 1.0;
    Eigen::VectorXd sub = A.partialPivLu().solve(rhs);
    sub = sub.cwiseMax(0.0);
    sub /= sub.sum();

    Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) mu[order[static_cast<std::size_t>(i)]] = sub[i];
    return mu;
}

}  // namespace

std::string_view to_string(GammaSource source) noexcept {
    switch (source) {
        case GammaSource::empirical: return "empirical";
        case GammaSource::exact_chain: return "exact-chain";
        case GammaSource::monte_carlo: return "monte-carlo";
    }
    return "unknown";
}

double log_likelihood(const SufficientStats& stats, const PhaseRates& rates) {
    check_same_period(stats, rates);
    double ll = 0.0;
    for (std::size_t r = 0; r < rates.lambda.size(); ++r) {
        if (stats.N[r] == 0.0 && stats.S[r] == 0.0) continue;
        ll += stats.S[r] * std::log(rates.p[r]) - (stats.N[r] - stats.S[r]) * rates.lambda[r];
    }
    return ll;
}

Eigen::VectorXd score(const SufficientStats& stats, const PhaseRates& rates) {
    check_same_period(stats, rates);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(rates.dim());
    for (std::size_t r = 0; r < rates.lambda.size(); ++r) {
        const double w = (stats.S[r] - rates.p[r] * stats.N[r]) / rates.p[r];
        if (w != 0.0) u += w * rates.grad_lambda.row(static_cast<Eigen::Index>(r)).transpose();
    }
    return u;
}

Eigen::MatrixXd phase_fisher(const PhaseRates& rates, std::int64_t r) {
    if (r < 0 || r >= rates.K()) throw DomainError("phase index out of range");
    const Eigen::VectorXd v = rates.grad_lambda.row(r).transpose();
    return odds_weight(rates.lambda[static_cast<std::size_t>(r)]) * v * v.transpose();
}

FisherInfo information_rate(const PhaseRates& rates, std::span<const double> alpha) {
    if (static_cast<std::int64_t>(alpha.size()) != rates.K())
        throw DomainError("alpha has " + std::to_string(alpha.size()) + " entries, expected K = " +
                          std::to_string(rates.K()));
    // Weighted Gram matrix G^T diag(w) G / K.
    Eigen::VectorXd w(rates.K());
    for (std::size_t r = 0; r < alpha.size(); ++r) {
        if (!(alpha[r] >= 0.0 && alpha[r] <= 1.0))
            throw DomainError("alpha entry " + std::to_string(r) + " outside [0, 1]");
        w[static_cast<Eigen::Index>(r)] = alpha[r] * odds_weight(rates.lambda[r]);
    }
    FisherInfo info;
    info.matrix = rates.grad_lambda.transpose() * w.asDiagonal() * rates.grad_lambda /
                  static_cast<double>(rates.K());
    info.matrix = 0.5 * (info.matrix + info.matrix.transpose()).eval();
    info.alpha.assign(alpha.begin(), alpha.end());
    info.theta = rates.theta;
    return info;
}

GatingFrequencies empirical_gating_frequencies(const SufficientStats& stats) {
    const std::int64_t L = stats.dims.L();
    if (L < 1)
        throw InsufficientDataError("need at least one complete period, have T = " +
                                    std::to_string(stats.dims.T) + " < K = " +
                                    std::to_string(stats.K()));
    GatingFrequencies out;
    out.provenance = GammaSource::empirical;
    out.gamma.resize(stats.N.size());
    for (std::size_t r = 0; r < stats.N.size(); ++r)
        out.gamma[r] = std::clamp(stats.N[r] / static_cast<double>(L), 0.0, 1.0);
    return out;
}

Eigen::MatrixXd period_transition_matrix(const PhaseRates& rates, PolicyKind policy,
                                         std::int64_t D) {
    if (D < 0) throw DomainError("dead time must be >= 0");
    const std::int64_t K = rates.K();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(D + 1, D + 1);
    if (policy == PolicyKind::free_running) {
        TimerRing ring(D);
        for (std::int64_t i = 0; i <= D; ++i) {
            ring.set_point(i);
            for (std::int64_t r = 0; r < K; ++r) ring.step(rates.p[static_cast<std::size_t>(r)]);
            for (std::int64_t j = 0; j <= D; ++j) P(i, j) = ring.at(j);
        }
        return P;
    }
    // Synchronous. A closed period only runs the timer down.
    for (std::int64_t i = 1; i <= D; ++i) P(i, std::max<std::int64_t>(i - K, 0)) = 1.0;
    // From 0: first detection at s leaves D - (K - 1 - s) at the next start.
    double none = 1.0;
    for (std::int64_t s = 0; s < K; ++s) {
        const double ps = rates.p[static_cast<std::size_t>(s)];
        P(0, std::max<std::int64_t>(D - (K - 1 - s), 0)) += none * ps;
        none *= 1.0 - ps;
    }
    P(0, 0) += none;
    return P;
}

GatingFrequencies exact_gating_frequencies(const PhaseRates& rates, PolicyKind policy,
                                           std::int64_t D) {
    const std::int64_t K = rates.K();
    GatingFrequencies out;
    out.provenance = GammaSource::exact_chain;
    out.gamma.assign(static_cast<std::size_t>(K), 1.0);
    const Eigen::VectorXd mu = D == 0 ? Eigen::VectorXd::Ones(1)
                                      : stationary_from_zero(period_transition_matrix(rates, policy, D));
    if (policy == PolicyKind::free_running) {
        if (D == 0) return out;
        TimerRing ring(D);
        ring.set(mu);
        for (std::int64_t r = 0; r < K; ++r) {
            out.gamma[static_cast<std::size_t>(r)] = std::clamp(ring.open(), 0.0, 1.0);
            ring.step(rates.p[static_cast<std::size_t>(r)]);
        }
        return out;
    }
    // Synchronous: open at r iff open at the period start and no detection yet.
    double open = mu[0];
    for (std::int64_t r = 0; r < K; ++r) {
        out.gamma[static_cast<std::size_t>(r)] = std::clamp(open, 0.0, 1.0);
        open *= 1.0 - rates.p[static_cast<std::size_t>(r)];
    }
    return out;
}

double condition_number(const Eigen::MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

double fisher_lower_bound(const FisherInfo& info, const Eigen::MatrixXd& W) {
    const Eigen::MatrixXd& I = info.matrix;
    if (I.rows() != W.rows() || I.cols() != W.cols())
        throw DomainError("weight and information matrices differ in size");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(I, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    Eigen::LLT<Eigen::MatrixXd> llt(I);
    if (llt.info() != Eigen::Success || !(lo > hi * 1e-15))
        throw ConditioningError("information matrix is singular or indefinite (smallest eigenvalue " +
                                    std::to_string(lo) + ")",
                                lo);
    // trace(W I^{-1}) = trace(I^{-1} W).
    return llt.solve(W).trace();
}

BinDerivatives per_bin_derivatives(bool y, const PhaseRates& rates, std::int64_t r) {
    if (r < 0 || r >= rates.K()) throw DomainError("phase index out of range");
    const auto ru = static_cast<std::size_t>(r);
    const double p = rates.p[ru], lambda = rates.lambda[ru];
    const Eigen::VectorXd v = rates.grad_lambda.row(r).transpose();
    const double yd = y ? 1.0 : 0.0;
    BinDerivatives out;
    out.m = y ? std::log(p) : -lambda;
    out.s = ((yd - p) / p) * v;
    out.J = (-yd * (1.0 - p) / (p * p)) * v * v.transpose();
    if (!rates.hess_lambda.empty()) out.J += (yd / p - 1.0) * rates.hess_lambda[ru];
    return out;
}

BoundReport bound_report(const PhaseRates& rates, const GatingFrequencies& gamma,
                         const Eigen::MatrixXd& W) {
    BoundReport rep;
    rep.theta = rates.theta;
    rep.gamma = gamma.gamma;
    const FisherInfo aware = information_rate(rates, gamma.gamma);
    const std::vector<double> ones(static_cast<std::size_t>(rates.K()), 1.0);
    const FisherInfo free = information_rate(rates, ones);
    rep.fisher = aware.matrix;
    rep.bound = fisher_lower_bound(aware, W);
    rep.bound_dead_time_free = fisher_lower_bound(free, W);
    rep.condition_number = condition_number(aware.matrix);
    return rep;
}

std::string BoundReport::to_json(int indent) const {
    nlohmann::ordered_json j;
    j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    j["gamma"] = gamma;
    std::vector<double> rows;
    for (Eigen::Index i = 0; i < fisher.rows(); ++i)
        for (Eigen::Index k = 0; k < fisher.cols(); ++k) rows.push_back(fisher(i, k));
    j["fisher"] = rows;
    j["bound"] = bound;
    j["bound_dead_time_free"] = bound_dead_time_free;
    j["ratio"] = ratio();
    j["condition_number"] = condition_number;
    return j.dump(indent);
}

}  // namespace ded
