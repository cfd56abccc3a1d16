#include "ded/simulate.hpp"

#include <string>

#include "ded/errors.hpp"
#include "ded/rng.hpp"

namespace ded {
namespace {

void check_rates(const PhaseRates& rates, const ModelDims& dims) {
    if (rates.K() != dims.K)
        throw DomainError("rates have " + std::to_string(rates.K()) + " phases but K = " +
                          std::to_string(dims.K));
}

// Visitor receives (t, phase, gate, detection) for every bin.
template <class Policy, class Visit>
void run(const PhaseRates& rates, Policy& policy, const ModelDims& dims, std::int64_t horizon,
         std::uint64_t seed, Visit&& visit) {
    Rng rng(seed);
    policy.reset();
    const bool randomized = policy.randomized();
    const double* p = rates.p.data();
    std::int64_t phase = 0;
    for (std::int64_t t = 0; t < horizon; ++t) {
        const double u = randomized ? rng.uniform() : 0.0;
        const bool g = policy.gate(t, u);
        const bool y = g && rng.uniform() < p[phase];
        policy.record(y);
        visit(t, phase, g, y);
        if (++phase == dims.K) phase = 0;
    }
}

// Devirtualises the two shipped policies; anything else goes through the
// virtual interface.
template <class Visit>
void dispatch(const PhaseRates& rates, GatingPolicy& policy, const ModelDims& dims,
              std::int64_t horizon, std::uint64_t seed, Visit&& visit) {
    if (auto* fr = dynamic_cast<FreeRunningPolicy*>(&policy))
        run(rates, *fr, dims, horizon, seed, visit);
    else if (auto* syn = dynamic_cast<SynchronousPolicy*>(&policy))
        run(rates, *syn, dims, horizon, seed, visit);
    else
        run(rates, policy, dims, horizon, seed, visit);
}

}  // namespace

Trajectory simulate_rates(const PhaseRates& rates, GatingPolicy& policy, const ModelDims& dims,
                          std::uint64_t seed) {
    check_rates(rates, dims);
    Trajectory traj;
    traj.dims = dims;
    traj.seed = seed;
    traj.gates.resize(static_cast<std::size_t>(dims.T));
    traj.detections.resize(static_cast<std::size_t>(dims.T));
    dispatch(rates, policy, dims, dims.T, seed, [&](std::int64_t t, std::int64_t, bool g, bool y) {
        traj.gates[static_cast<std::size_t>(t)] = g;
        traj.detections[static_cast<std::size_t>(t)] = y;
    });
    return traj;
}

Trajectory simulate(const RateModel& model, const Eigen::VectorXd& theta, GatingPolicy& policy,
                    const ModelDims& dims, std::uint64_t seed) {
    if (model.period() != dims.K) throw DomainError("model period does not match dims.K");
    return simulate_rates(model.evaluate(theta), policy, dims, seed);
}

std::vector<SufficientStats> simulate_stats(const PhaseRates& rates, GatingPolicy& policy,
                                            const ModelDims& dims,
                                            std::span<const std::int64_t> horizons,
                                            std::uint64_t seed) {
    check_rates(rates, dims);
    std::vector<SufficientStats> out;
    if (horizons.empty()) return out;
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (horizons[i] < 0 || (i > 0 && horizons[i] <= horizons[i - 1]))
            throw DomainError("horizons must be nonnegative and strictly increasing");
    }
    out.reserve(horizons.size());
    // Integer accumulators; copied into the double-valued snapshot.
    std::vector<std::int64_t> n(static_cast<std::size_t>(dims.K), 0);
    std::vector<std::int64_t> s(static_cast<std::size_t>(dims.K), 0);
    auto snapshot = [&](std::int64_t horizon) {
        SufficientStats st(dims.with_horizon(horizon));
        for (std::size_t r = 0; r < n.size(); ++r) {
            st.N[r] = static_cast<double>(n[r]);
            st.S[r] = static_cast<double>(s[r]);
        }
        out.push_back(std::move(st));
    };
    std::size_t next = 0;
    while (next < horizons.size() && horizons[next] == 0) snapshot(horizons[next++]);
    dispatch(rates, policy, dims, horizons.back(), seed,
             [&](std::int64_t t, std::int64_t phase, bool g, bool y) {
                 n[static_cast<std::size_t>(phase)] += g;
                 s[static_cast<std::size_t>(phase)] += y;
                 if (t + 1 == horizons[next]) snapshot(horizons[next++]);
             });
    return out;
}

SufficientStats accumulate_stats(const Trajectory& traj) {
    SufficientStats st(traj.dims);
    const auto K = static_cast<std::size_t>(traj.dims.K);
    for (std::size_t t = 0; t < traj.gates.size(); ++t) {
        st.N[t % K] += traj.gates[t];
        st.S[t % K] += traj.detections[t];
    }
    return st;
}

bool check_feasible(const Trajectory& traj) {
    const auto T = static_cast<std::int64_t>(traj.gates.size());
    if (traj.detections.size() != traj.gates.size() || T != traj.dims.T) return false;
    std::int64_t closed_until = -1;  // last bin forced closed by a detection
    for (std::int64_t t = 0; t < T; ++t) {
        const auto i = static_cast<std::size_t>(t);
        if (traj.detections[i] > traj.gates[i]) return false;
        if (t <= closed_until && traj.gates[i]) return false;
        if (traj.detections[i]) closed_until = t + traj.dims.D;
    }
    return true;
}

std::vector<std::int64_t> detection_bins(const Trajectory& traj) {
    std::vector<std::int64_t> bins;
    for (std::size_t t = 0; t < traj.detections.size(); ++t)
        if (traj.detections[t]) bins.push_back(static_cast<std::int64_t>(t));
    return bins;
}

}  // namespace ded
