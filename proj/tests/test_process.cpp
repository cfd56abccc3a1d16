#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "ded/errors.hpp"
#include "ded/event_stream.hpp"
#include "ded/gating.hpp"
#include "ded/lidar.hpp"
#include "ded/pulse.hpp"
#include "ded/rng.hpp"
#include "ded/simulate.hpp"
#include "oracles.hpp"

using namespace ded;

namespace {

PhaseRates constant_rates(std::int64_t K, double lambda) {
    return PhaseRates::from_lambda(std::vector<double>(static_cast<std::size_t>(K), lambda),
                                   Eigen::MatrixXd::Zero(K, 1));
}

PhaseRates random_rates(std::int64_t K, Rng& rng, double lo = 0.05, double hi = 0.8) {
    std::vector<double> lambda(static_cast<std::size_t>(K));
    for (auto& l : lambda) l = lo + (hi - lo) * rng.uniform();
    return PhaseRates::from_lambda(lambda, Eigen::MatrixXd::Zero(K, 1));
}

// Steps a policy through a fixed detection sequence and returns the gates.
std::vector<int> drive(GatingPolicy& policy, const std::vector<int>& y) {
    policy.reset();
    std::vector<int> g;
    for (std::size_t t = 0; t < y.size(); ++t) {
        g.push_back(policy.gate(static_cast<std::int64_t>(t), 0.0));
        policy.record(y[t] != 0);
    }
    return g;
}

// Direct re-summation of a trajectory, independent of accumulate_stats.
SufficientStats resum(const Trajectory& tr) {
    SufficientStats s(tr.dims);
    for (std::int64_t t = 0; t < tr.dims.T; ++t) {
        const auto r = static_cast<std::size_t>(t % tr.dims.K);
        s.N[r] += tr.gates[static_cast<std::size_t>(t)];
        s.S[r] += tr.detections[static_cast<std::size_t>(t)];
    }
    return s;
}

}  // namespace

TEST_CASE("ModelDims validates its fields") {
    CHECK_THROWS_AS(ModelDims(0, 0, 0), DomainError);
    CHECK_THROWS_AS(ModelDims(3, -1, 0), DomainError);
    CHECK_THROWS_AS(ModelDims(3, 1, -5), DomainError);
    const ModelDims d(4, 9, 17);
    CHECK(d.L() == 4);
}

TEST_CASE("free-running gate follows the timer recursion") {
    const ModelDims dims(2, 1, 8);
    FreeRunningPolicy policy(dims);
    CHECK(drive(policy, {0, 0, 0, 1, 0, 0, 0, 0}) == std::vector<int>{1, 1, 1, 1, 0, 1, 1, 1});

    const ModelDims no_dead(3, 0, 6);
    FreeRunningPolicy open(no_dead);
    CHECK(drive(open, {1, 1, 1, 1, 1, 1}) == std::vector<int>(6, 1));
    CHECK(drive(policy, std::vector<int>(8, 0)) == std::vector<int>(8, 1));
}

TEST_CASE("synchronous gate closes for the rest of the period and respects the timer") {
    // D < K: detection at the first bin of period 1 closes bins 5..7, period 2 reopens.
    {
        SynchronousPolicy policy(ModelDims(4, 2, 12));
        const auto g = drive(policy, {0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0});
        CHECK(g == std::vector<int>{1, 1, 1, 1, 1, 0, 0, 0, 1, 1, 1, 1});
    }
    // D >= K: the timer is still running at the next period start, which stays closed.
    {
        SynchronousPolicy policy(ModelDims(3, 4, 9));
        const auto g = drive(policy, {1, 0, 0, 0, 0, 0, 0, 0, 0});
        // Timer at t = 3 is D - K + 1 = 2 > 0; at t = 6 it is 0.
        CHECK(g == std::vector<int>{1, 0, 0, 0, 0, 0, 1, 1, 1});
    }
    // A late detection with D < K reaches into the next period start.
    {
        SynchronousPolicy policy(ModelDims(4, 2, 12));
        const auto g = drive(policy, {0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0});
        CHECK(g == std::vector<int>{1, 1, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1});
    }
    SynchronousPolicy quiet(ModelDims(5, 7, 20));
    CHECK(drive(quiet, std::vector<int>(20, 0)) == std::vector<int>(20, 1));
}

TEST_CASE("policies agree with the window formulas on random paths") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::int64_t K = 1 + static_cast<std::int64_t>(rng() % 6);
        const std::int64_t D = static_cast<std::int64_t>(rng() % 9);
        const std::int64_t T = 40;
        for (auto scheme : {oracle::Scheme::free_running, oracle::Scheme::synchronous}) {
            auto policy = make_policy(scheme == oracle::Scheme::free_running ? PolicyKind::free_running
                                                                             : PolicyKind::synchronous,
                                      ModelDims(K, D, T));
            policy->reset();
            std::vector<int> y;
            for (std::int64_t t = 0; t < T; ++t) {
                const bool g = policy->gate(t, 0.0);
                REQUIRE(g == oracle::gate(y, t, K, D, scheme));
                const int yt = g && rng.uniform() < 0.4;
                y.push_back(yt);
                policy->record(yt);
            }
        }
    }
}

TEST_CASE("simulate produces feasible trajectories") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t K = 1 + static_cast<std::int64_t>(rng() % 12);
        const std::int64_t D = static_cast<std::int64_t>(rng() % 30);
        const ModelDims dims(K, D, 2000 + static_cast<std::int64_t>(rng() % 100));
        const PhaseRates rates = random_rates(K, rng, 0.01, 2.0);
        for (auto kind : {PolicyKind::free_running, PolicyKind::synchronous}) {
            auto policy = make_policy(kind, dims);
            const Trajectory tr = simulate_rates(rates, *policy, dims, rng());
            CHECK(check_feasible(tr));
        }
    }
}

TEST_CASE("simulate is deterministic in the seed") {
    const ModelDims dims(7, 3, 500);
    const PhaseRates rates = constant_rates(7, 0.3);
    auto policy = free_running_policy(dims);
    const Trajectory a = simulate_rates(rates, *policy, dims, 99);
    const Trajectory b = simulate_rates(rates, *policy, dims, 99);
    const Trajectory c = simulate_rates(rates, *policy, dims, 100);
    CHECK(a.detections == b.detections);
    CHECK(a.detections != c.detections);
}

TEST_CASE("near-zero rates give no detections and fully open gates") {
    const ModelDims dims(5, 3, 53);
    const PhaseRates rates = constant_rates(5, 1e-12);
    auto policy = free_running_policy(dims);
    const SufficientStats s = accumulate_stats(simulate_rates(rates, *policy, dims, 3));
    for (std::size_t r = 0; r < 5; ++r) {
        CHECK(s.S[r] == 0.0);
        CHECK(s.N[r] == (r < 3 ? 11.0 : 10.0));  // 53 = 10 * 5 + 3 tail bins
    }
}

TEST_CASE("nominal lidar simulation concentrates detections near the echo") {
    const LidarRateModel model(wrapped_gaussian(10.0, 1000), ThetaBox::defaults(1000));
    const ModelDims dims(1000, 500, 1000 * 2000);
    auto policy = free_running_policy(dims);
    const Trajectory tr = simulate(model, lidar_theta(1.0, 370.4, 0.003), *policy, dims, 17);
    const SufficientStats s = accumulate_stats(tr);
    std::size_t best = 0;
    for (std::size_t r = 0; r < 1000; ++r)
        if (s.S[r] > s.S[best]) best = r;
    CHECK(std::abs(static_cast<double>(best) - 370.4) < 30.0);
    CHECK_THROWS_AS(simulate(model, lidar_theta(-1.0, 370.4, 0.003), *policy, dims, 1), DomainError);
}

TEST_CASE("accumulate_stats matches direct summation") {
    const ModelDims dims(2, 1, 37);
    auto policy = free_running_policy(dims);
    const Trajectory tr = simulate_rates(constant_rates(2, 0.7), *policy, dims, 8);
    CHECK(accumulate_stats(tr) == resum(tr));

    Trajectory empty;
    empty.dims = ModelDims(4, 1, 0);
    const SufficientStats z = accumulate_stats(empty);
    CHECK(z.N == std::vector<double>(4, 0.0));
    CHECK(z.S == std::vector<double>(4, 0.0));

    Trajectory quiet;
    quiet.dims = ModelDims(3, 2, 9);
    quiet.gates.assign(9, 1);
    quiet.detections.assign(9, 0);
    CHECK(accumulate_stats(quiet).N == std::vector<double>(3, 3.0));
}

TEST_CASE("simulate_stats snapshots equal prefix statistics") {
    const ModelDims dims(6, 4, 3000);
    Rng rng(2);
    const PhaseRates rates = random_rates(6, rng);
    for (auto kind : {PolicyKind::free_running, PolicyKind::synchronous}) {
        auto policy = make_policy(kind, dims);
        const Trajectory tr = simulate_rates(rates, *policy, dims, 77);
        const std::int64_t horizons[] = {6, 1001, 2999, 3000};
        const auto snaps = simulate_stats(rates, *policy, dims, horizons, 77);
        REQUIRE(snaps.size() == 4);
        for (std::size_t h = 0; h < 4; ++h) {
            Trajectory prefix = tr;
            prefix.dims = dims.with_horizon(horizons[h]);
            prefix.gates.resize(static_cast<std::size_t>(horizons[h]));
            prefix.detections.resize(static_cast<std::size_t>(horizons[h]));
            CHECK(snaps[h] == resum(prefix));
        }
    }
    const std::int64_t bad[] = {10, 10};
    auto policy = free_running_policy(dims);
    CHECK_THROWS_AS(simulate_stats(rates, *policy, dims, bad, 1), DomainError);
}

TEST_CASE("free-running count identity holds up to boundary terms") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t K = 2 + static_cast<std::int64_t>(rng() % 10);
        const std::int64_t D = static_cast<std::int64_t>(rng() % 25);
        const std::int64_t L = 300;
        const ModelDims dims(K, D, L * K);
        auto policy = free_running_policy(dims);
        const SufficientStats s = accumulate_stats(simulate_rates(random_rates(K, rng), *policy, dims, rng()));
        for (std::int64_t r = 0; r < K; ++r) {
            double closed = 0.0;
            for (std::int64_t u = 1; u <= D; ++u)
                closed += s.S[static_cast<std::size_t>(((r - u) % K + K) % K)];
            CHECK(std::abs(s.N[static_cast<std::size_t>(r)] - (static_cast<double>(L) - closed)) <=
                  static_cast<double>(D + 1));
        }
    }
}

TEST_CASE("check_feasible rejects violations") {
    Trajectory tr;
    tr.dims = ModelDims(4, 2, 8);
    tr.gates.assign(8, 1);
    tr.detections.assign(8, 0);
    CHECK(check_feasible(tr));
    tr.detections[3] = 1;
    CHECK_FALSE(check_feasible(tr));  // bin 4 open right after a detection
    tr.gates[4] = tr.gates[5] = 0;
    CHECK(check_feasible(tr));
    tr.detections[4] = 1;
    CHECK_FALSE(check_feasible(tr));  // detection in a closed bin
}

TEST_CASE("ingest_event_stream reconstructs gates") {
    const SufficientStats empty = ingest_event_stream(std::vector<std::int64_t>{}, PolicyKind::free_running,
                                                      ModelDims(5, 3, 25));
    CHECK(empty.N == std::vector<double>(5, 5.0));
    CHECK(empty.S == std::vector<double>(5, 0.0));

    const std::vector<std::int64_t> one{10};
    const SufficientStats s = ingest_event_stream(one, PolicyKind::free_running, ModelDims(8, 3, 16));
    // Bins 11, 12, 13 (phases 3, 4, 5) are closed.
    CHECK(s.N == std::vector<double>{2, 2, 2, 1, 1, 1, 2, 2});
    CHECK(s.S == std::vector<double>{0, 0, 1, 0, 0, 0, 0, 0});

    const SufficientStats sync = ingest_event_stream(std::vector<std::int64_t>{4}, PolicyKind::synchronous,
                                                     ModelDims(4, 2, 12));
    CHECK(sync.N == std::vector<double>{3, 2, 2, 2});
}

TEST_CASE("ingest_event_stream reports integrity violations") {
    const ModelDims dims(8, 3, 40);
    auto message = [&](std::vector<std::int64_t> d, PolicyKind kind) {
        try {
            ingest_event_stream(d, kind, dims);
        } catch (const DataIntegrityError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    const std::string close = message({5, 7}, PolicyKind::free_running);
    CHECK(close.find('5') != std::string::npos);
    CHECK(close.find('7') != std::string::npos);
    CHECK_FALSE(message({5, 4}, PolicyKind::free_running).empty());
    CHECK_FALSE(message({5, 5}, PolicyKind::free_running).empty());
    CHECK_FALSE(message({40}, PolicyKind::free_running).empty());
    CHECK_FALSE(message({-1}, PolicyKind::free_running).empty());
    CHECK_FALSE(message({1, 6}, PolicyKind::synchronous).empty());  // same period
    CHECK(message({1, 9}, PolicyKind::synchronous).empty());
}

TEST_CASE("simulate -> detections -> ingest reproduces the statistics") {
    Rng rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        const std::int64_t K = 1 + static_cast<std::int64_t>(rng() % 15);
        const std::int64_t D = static_cast<std::int64_t>(rng() % 40);
        const ModelDims dims(K, D, 1000 + static_cast<std::int64_t>(rng() % 500));
        const PhaseRates rates = random_rates(K, rng, 0.01, 1.5);
        for (auto kind : {PolicyKind::free_running, PolicyKind::synchronous}) {
            auto policy = make_policy(kind, dims);
            const Trajectory tr = simulate_rates(rates, *policy, dims, rng());
            CHECK(ingest_event_stream(detection_bins(tr), kind, dims) == accumulate_stats(tr));
        }
    }
}

TEST_CASE("event-stream and stats files round-trip") {
    const ModelDims dims(6, 9, 600);
    auto policy = synchronous_policy(dims);
    const Trajectory tr = simulate_rates(constant_rates(6, 0.4), *policy, dims, 4);
    const EventStream stream{dims, PolicyKind::synchronous, detection_bins(tr)};
    std::stringstream ss;
    write_event_stream(ss, stream);
    const EventStream back = read_event_stream(ss);
    CHECK(back.dims == dims);
    CHECK(back.scheme == PolicyKind::synchronous);
    CHECK(back.detections == stream.detections);

    const SufficientStats s = accumulate_stats(tr);
    std::stringstream cs;
    write_stats_csv(cs, s);
    CHECK(read_stats_csv(cs) == s);

    std::stringstream bad("K=6 D=9 scheme=free_running\n1\n");
    CHECK_THROWS_AS(read_event_stream(bad), DataIntegrityError);
    std::stringstream bad_stats("# K=2 D=0 T=2\nr,N,S\n0,1,0\n");
    CHECK_THROWS_AS(read_stats_csv(bad_stats), DataIntegrityError);
    CHECK_THROWS_AS(parse_policy_kind("paralyzable"), ConfigError);
}

TEST_CASE("replicate streams are reproducible and distinct") {
    CHECK(Rng::stream(1, 0)() == Rng::stream(1, 0)());
    CHECK(Rng::stream(1, 0)() != Rng::stream(1, 1)());
    CHECK(Rng::stream(1, 0)() != Rng::stream(2, 0)());
    Rng r(3);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("synchronous path law sums to one and matches simulation") {
    const std::vector<double> lambda{0.4, 0.9, 0.2};
    std::vector<double> p;
    for (double l : lambda) p.push_back(-std::expm1(-l));
    const auto paths = oracle::enumerate_paths(p, 2, 6, oracle::Scheme::synchronous);
    double total = 0.0;
    for (const auto& path : paths) total += path.prob;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    const ModelDims dims(3, 2, 6);
    const PhaseRates rates = PhaseRates::from_lambda(lambda, Eigen::MatrixXd::Zero(3, 1));
    auto policy = synchronous_policy(dims);
    const int n = 200000;
    std::vector<double> counts(64, 0.0);
    for (int i = 0; i < n; ++i) {
        const Trajectory tr = simulate_rates(rates, *policy, dims, Rng::stream(404, static_cast<std::uint64_t>(i))());
        std::uint32_t bits = 0;
        for (std::size_t t = 0; t < 6; ++t) bits |= static_cast<std::uint32_t>(tr.detections[t]) << t;
        counts[bits] += 1.0;
    }
    double seen = 0.0;
    for (const auto& path : paths) {
        const double se = std::sqrt(path.prob * (1 - path.prob) / n);
        CHECK(std::abs(counts[path.bits] / n - path.prob) <= 5 * se + 1e-12);
        seen += counts[path.bits];
    }
    CHECK(seen == n);  // no infeasible path was ever produced
}
