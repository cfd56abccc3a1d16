#include "ded/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "ded/errors.hpp"

namespace ded {
namespace {

constexpr double kC1 = 1e-4;
constexpr double kC2 = 0.9;

struct Point {
    double alpha = 0.0;
    double f = 0.0;
    double slope = 0.0;  // directional derivative
    Eigen::VectorXd x;
    Eigen::VectorXd g;
};

// Minimiser of the cubic through (a, fa, da), (b, fb, db), kept well inside
// the bracket; falls back to bisection.
double cubic_step(const Point& a, const Point& b) {
    const double lo = std::min(a.alpha, b.alpha), hi = std::max(a.alpha, b.alpha);
    const double margin = 0.1 * (hi - lo);
    const double d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    const double disc = d1 * d1 - a.slope * b.slope;
    double t = 0.5 * (lo + hi);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
        const double denom = b.slope - a.slope + 2.0 * d2;
        if (denom != 0.0) {
            const double c = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
            if (std::isfinite(c)) t = c;
        }
    }
    if (t < lo + margin || t > hi - margin) t = 0.5 * (lo + hi);
    return t;
}

class LineSearch {
public:
    LineSearch(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& dir,
               const Point& origin, int& evals, int max_evals)
        : f_(f), x_(x), dir_(dir), origin_(origin), evals_(evals), max_evals_(max_evals) {}

    // Returns a point satisfying at least sufficient decrease, or nothing
    // (alpha = 0) on failure.
    Point run(double alpha) {
        Point prev = origin_;
        for (int i = 0; evals_ < max_evals_; ++i) {
            Point cur = eval(alpha);
            if (!std::isfinite(cur.f)) {
                // Outside the domain: back off towards the last good step.
                alpha = prev.alpha + 0.5 * (alpha - prev.alpha);
                if (alpha - prev.alpha < 1e-16 * std::max(1.0, alpha)) break;
                continue;
            }
            if (cur.f > origin_.f + kC1 * cur.alpha * origin_.slope || (i > 0 && cur.f >= prev.f))
                return zoom(prev, cur);
            if (std::abs(cur.slope) <= -kC2 * origin_.slope) return cur;
            if (cur.slope >= 0.0) return zoom(cur, prev);
            prev = cur;
            alpha *= 2.0;
        }
        return prev.alpha > 0.0 ? prev : Point{};
    }

private:
    Point eval(double alpha) {
        Point p;
        p.alpha = alpha;
        p.x = x_ + alpha * dir_;
        p.g.resize(x_.size());
        p.f = f_(p.x, p.g);
        ++evals_;
        if (!std::isfinite(p.f) || !p.g.allFinite())
            p.f = std::numeric_limits<double>::infinity();
        else
            p.slope = p.g.dot(dir_);
        return p;
    }

    // lo satisfies sufficient decrease and has the lowest value so far.
    Point zoom(Point lo, Point hi) {
        while (evals_ < max_evals_) {
            if (std::abs(hi.alpha - lo.alpha) <= 1e-14 * std::max(1.0, lo.alpha)) break;
            Point cur = std::isfinite(hi.f) ? eval(cubic_step(lo, hi)) : eval(0.5 * (lo.alpha + hi.alpha));
            if (!std::isfinite(cur.f) || cur.f > origin_.f + kC1 * cur.alpha * origin_.slope ||
                cur.f >= lo.f) {
                hi = cur;
            } else {
                if (std::abs(cur.slope) <= -kC2 * origin_.slope) return cur;
                if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = cur;
            }
        }
        return lo.alpha > 0.0 ? lo : Point{};
    }

    const Objective& f_;
    const Eigen::VectorXd& x_;
    const Eigen::VectorXd& dir_;
    const Point& origin_;
    int& evals_;
    int max_evals_;
};

}  // namespace

std::string_view to_string(LbfgsStop stop) noexcept {
    switch (stop) {
        case LbfgsStop::gradient_zero: return "gradient-zero";
        case LbfgsStop::xtol: return "xtol";
        case LbfgsStop::ftol: return "ftol";
        case LbfgsStop::max_evals: return "max-evals";
        case LbfgsStop::line_search_failed: return "line-search-failed";
    }
    return "unknown";
}

LbfgsResult minimize_lbfgs(const Objective& f, const Eigen::VectorXd& x0,
                           const LbfgsSettings& settings) {
    LbfgsResult res;
    Point cur;
    cur.x = x0;
    cur.g.resize(x0.size());
    cur.f = f(cur.x, cur.g);
    res.evals = 1;
    if (!std::isfinite(cur.f) || !cur.g.allFinite())
        throw DomainError("objective is not finite at the initial point");

    auto finish = [&](LbfgsStop stop) {
        res.x = cur.x;
        res.f = cur.f;
        res.grad = cur.g;
        res.stop = stop;
        return res;
    };
    // Relative gradient: first-order change in f for a relative change in
    // each coordinate, measured against the objective tolerance.
    auto negligible_gradient = [&] {
        const double fscale = std::max(std::abs(cur.f), 1.0);
        for (Eigen::Index i = 0; i < cur.g.size(); ++i)
            if (std::abs(cur.g[i]) * std::max(std::abs(cur.x[i]), 1.0) > settings.ftol_rel * fscale)
                return false;
        return true;
    };

    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;  // (s, y)
    while (true) {
        if (negligible_gradient()) return finish(LbfgsStop::gradient_zero);
        if (res.evals >= settings.max_evals) return finish(LbfgsStop::max_evals);

        // Two-loop recursion.
        Eigen::VectorXd q = cur.g;
        std::vector<double> rho(memory.size()), a(memory.size());
        for (std::size_t i = memory.size(); i-- > 0;) {
            rho[i] = 1.0 / memory[i].second.dot(memory[i].first);
            a[i] = rho[i] * memory[i].first.dot(q);
            q -= a[i] * memory[i].second;
        }
        if (!memory.empty()) {
            const auto& [s, y] = memory.back();
            q *= s.dot(y) / y.dot(y);
        }
        for (std::size_t i = 0; i < memory.size(); ++i) {
            const double b = rho[i] * memory[i].second.dot(q);
            q += (a[i] - b) * memory[i].first;
        }
        Eigen::VectorXd dir = -q;
        if (!(dir.dot(cur.g) < 0.0)) {
            memory.clear();
            dir = -cur.g;
        }

        cur.alpha = 0.0;
        cur.slope = dir.dot(cur.g);
        const double alpha0 =
            memory.empty() ? std::min(1.0, 1.0 / cur.g.lpNorm<Eigen::Infinity>()) : 1.0;
        LineSearch ls(f, cur.x, dir, cur, res.evals, settings.max_evals);
        Point next = ls.run(alpha0);
        if (next.alpha <= 0.0 || !(next.f <= cur.f)) {
            if (res.evals >= settings.max_evals) return finish(LbfgsStop::max_evals);
            if (!memory.empty()) {
                memory.clear();  // retry along steepest descent
                continue;
            }
            return finish(LbfgsStop::line_search_failed);
        }

        Eigen::VectorXd s = next.x - cur.x;
        Eigen::VectorXd y = next.g - cur.g;
        const double df = cur.f - next.f;
        const double fscale = std::abs(cur.f);
        bool small_step = true;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (std::abs(s[i]) > settings.xtol_rel * std::abs(next.x[i])) small_step = false;
        cur = std::move(next);
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            memory.emplace_back(std::move(s), std::move(y));
            if (static_cast<int>(memory.size()) > settings.memory) memory.pop_front();
        }
        if (small_step) return finish(LbfgsStop::xtol);
        if (df <= settings.ftol_rel * fscale) return finish(LbfgsStop::ftol);
    }
}

}  // namespace ded
