// Empirical convergence rate of the robust pilot on the nominal configuration:
// least-squares slope of log RMS ||theta_pilot - theta0|| against log T over
// T = 1e3 .. 1e6 periods, expected in [-0.6, -0.4] for a sqrt(T)-consistent pilot.

#include <cmath>
#include <cstdio>

#include "ded/bench.hpp"
#include "ded/rng.hpp"
#include "ded/simulate.hpp"

using namespace ded;

int main() {
    const ExperimentConfig c;
    const LidarRateModel model = c.make_model();
    const PhaseRates rates = model.evaluate(c.theta0);
    const std::int64_t horizons[] = {1000000, 10000000, 100000000, 1000000000};
    const ModelDims dims(c.K, c.D, horizons[3]);
    const int replicates = 4;
    double sq[4] = {}, sq_a[4] = {}, sq_tau[4] = {}, sq_b[4] = {};
    auto policy = free_running_policy(dims);
    for (int rep = 0; rep < replicates; ++rep) {
        const auto snaps = simulate_stats(rates, *policy, dims, horizons, Rng::stream(20261016, rep)());
        for (int h = 0; h < 4; ++h) {
            const Eigen::VectorXd p = robust_pilot(rate_estimates(snaps[static_cast<std::size_t>(h)]), model).theta;
            const double ea = p[kAmp] - c.theta0[kAmp];
            const double et = circular_distance(p[kTau], c.theta0[kTau], static_cast<double>(c.K));
            const double eb = p[kBg] - c.theta0[kBg];
            sq[h] += ea * ea + et * et + eb * eb;
            sq_a[h] += ea * ea;
            sq_tau[h] += et * et;
            sq_b[h] += eb * eb;
        }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int h = 0; h < 4; ++h) {
        const double x = std::log10(static_cast<double>(horizons[h] / c.K));
        const double y = std::log10(std::sqrt(sq[h] / replicates));
        sx += x, sy += y, sxx += x * x, sxy += x * y;
        std::printf("    L=%-10lld rms error %.4g  (a %.3g, tau %.3g bins, b %.3g)\n",
                    static_cast<long long>(horizons[h] / c.K), std::sqrt(sq[h] / replicates),
                    std::sqrt(sq_a[h] / replicates), std::sqrt(sq_tau[h] / replicates), std::sqrt(sq_b[h] / replicates));
    }
    const double slope = (4 * sxy - sx * sy) / (4 * sxx - sx * sx);
    const bool pass = slope >= -0.6 && slope <= -0.4;
    std::printf("robust pilot error slope %.3f per decade of T (expected [-0.6, -0.4]): %s\n", slope,
                pass ? "PASS" : "FAIL");
    return pass ? 0 : 1;
}
