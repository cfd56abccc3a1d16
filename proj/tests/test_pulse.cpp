#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "ded/errors.hpp"
#include "ded/lidar.hpp"
#include "ded/pulse.hpp"
#include "ded/rng.hpp"
#include "oracles.hpp"

using namespace ded;
using std::numbers::pi;

namespace {

// (1/K) sum_r profile_r exp(2 pi i r / K): the discrete first mode of a binned profile.
std::complex<double> dft1(const std::vector<double>& profile) {
    const double K = static_cast<double>(profile.size());
    std::complex<double> m = 0.0;
    for (std::size_t r = 0; r < profile.size(); ++r)
        m += profile[r] * std::polar(1.0, 2 * pi * static_cast<double>(r) / K);
    return m / K;
}

// Binned profile by Simpson quadrature of the density.
double binned_by_quadrature(const PulseTemplate& f, double tau, std::int64_t r) {
    const double lo = tau - static_cast<double>(r);
    const int n = 200;
    double sum = f.density(lo) + f.density(lo + 1.0);
    for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * f.density(lo + i / static_cast<double>(n));
    return sum / (3.0 * n);
}

}  // namespace

TEST_CASE("wrapped Gaussian is a unit-mass periodic density") {
    CHECK_THROWS_AS(wrapped_gaussian(0.0, 100), DomainError);
    CHECK_THROWS_AS(wrapped_gaussian(-1.0, 100), DomainError);
    for (double sigma : {0.3, 1.0, 10.0, 40.0}) {
        for (std::int64_t K : {1, 7, 100, 1000}) {
            const auto f = wrapped_gaussian(sigma, K);
            for (double tau : {0.0, 0.37, 370.4, static_cast<double>(K) - 0.2}) {
                const auto prof = f->binned_profile(tau);
                CHECK(std::accumulate(prof.begin(), prof.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
            }
            CHECK(f->density(2.5) == doctest::Approx(f->density(2.5 + static_cast<double>(K))).epsilon(1e-12));
            CHECK(f->density(0.3 * static_cast<double>(K)) >= 0.0);
        }
    }
}

TEST_CASE("binned template is shift-equivariant and matches quadrature") {
    const auto f = wrapped_gaussian(3.0, 50);
    for (double tau : {0.0, 12.3, 49.9}) {
        for (std::int64_t r = 0; r < 50; ++r) {
            CHECK(f->binned(tau + 1.0, (r + 1) % 50) == doctest::Approx(f->binned(tau, r)).epsilon(1e-12));
            CHECK(f->binned(tau, r) == doctest::Approx(binned_by_quadrature(*f, tau, r)).epsilon(1e-9));
        }
    }
}

TEST_CASE("tau derivatives of the binned template match finite differences") {
    for (const auto& f : {wrapped_gaussian(10.0, 1000), wrapped_gaussian(1.5, 40)}) {
        const double K = static_cast<double>(f->period());
        for (double tau : {0.3 * K, 0.71 * K}) {
            for (std::int64_t r = 0; r < f->period(); r += 3) {
                const double h = 1e-4;
                const double fd = (f->binned(tau + h, r) - f->binned(tau - h, r)) / (2 * h);
                const double fd2 = (f->binned_tau_derivative(tau + h, r) - f->binned_tau_derivative(tau - h, r)) / (2 * h);
                CHECK(f->binned_tau_derivative(tau, r) == doctest::Approx(fd).epsilon(1e-6).scale(1e-12));
                CHECK(f->binned_tau_second_derivative(tau, r) == doctest::Approx(fd2).epsilon(1e-6).scale(1e-11));
            }
        }
    }
}

TEST_CASE("binned Fourier coefficients") {
    const auto f = wrapped_gaussian(10.0, 1000);
    CHECK(std::abs(f->fourier(0) - std::complex<double>(1e-3, 0.0)) < 1e-15);
    const double x = 1.0 / 1000.0;
    const std::complex<double> closed =
        1e-3 * std::exp(-2 * pi * pi * 100 / 1e6) * std::polar(1.0, pi / 1000) * (std::sin(pi * x) / (pi * x));
    CHECK(std::abs(f->fourier(1) - closed) < 1e-15);
    // The first DFT mode of the binned profile at tau = 0 agrees up to aliasing.
    CHECK(std::abs(dft1(f->binned_profile(0.0)) - f->fourier(1)) < 1e-14);

    const auto narrow = wrapped_gaussian(1.2, 16);
    CHECK(std::abs(dft1(narrow->binned_profile(0.0)) - narrow->fourier(1)) < 1e-12);
}

TEST_CASE("tabulated template validation") {
    const std::vector<double> short_hist{1, 2};
    CHECK_THROWS_AS(tabulated_template(short_hist, 3), DomainError);
    const std::vector<double> negative{1, -2, 3};
    CHECK_THROWS_AS(tabulated_template(negative, 3), DomainError);
    const std::vector<double> zeros{0, 0, 0};
    CHECK_THROWS_AS(tabulated_template(zeros, 3), DomainError);
}

TEST_CASE("tabulated template reproduces its histogram and is a monotone CDF") {
    std::vector<double> onehot(20, 0.0);
    onehot[7] = 5.0;
    const auto t = tabulated_template(onehot, 20);
    const auto prof = t->binned_profile(0.0);
    CHECK(prof[7] == doctest::Approx(1.0).epsilon(1e-12));
    for (double tau : {0.0, 0.4, 13.6}) {
        const auto p = t->binned_profile(tau);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        for (double v : p) CHECK(v >= -1e-15);
    }

    Rng rng(8);
    std::vector<double> hist(30);
    for (auto& h : hist) h = rng.uniform() < 0.3 ? 0.0 : 10 * rng.uniform();
    const TabulatedTemplate tab(hist, 30);
    const double total = std::accumulate(hist.begin(), hist.end(), 0.0);
    for (std::int64_t r = 0; r < 30; ++r)
        CHECK(tab.binned(0.0, r) == doctest::Approx(hist[static_cast<std::size_t>(r)] / total).epsilon(1e-12).scale(1e-15));
    double prev = tab.cumulative(-3.0);
    for (double u = -3.0; u <= 63.0; u += 0.01) {
        const double g = tab.cumulative(u);
        REQUIRE(g >= prev - 1e-15);
        prev = g;
        REQUIRE(tab.density(u) >= 0.0);
    }
    CHECK(tab.cumulative(4.3 + 30.0) == doctest::Approx(tab.cumulative(4.3) + 1.0).epsilon(1e-12));
    for (double x : {0.2, 5.5, 17.77, 29.9}) {
        const double h = 1e-6;
        CHECK(tab.density_derivative(x) ==
              doctest::Approx((tab.density(x + h) - tab.density(x - h)) / (2 * h)).epsilon(1e-5).scale(1e-6));
    }
}

TEST_CASE("tabulated template of a sampled Gaussian tracks the analytic one") {
    const auto g = wrapped_gaussian(10.0, 1000);
    const auto hist = g->binned_profile(0.0);
    const auto t = tabulated_template(hist, 1000);
    double worst = 0.0;
    for (double tau : {370.4, 12.75, 999.5})
        for (std::int64_t r = 0; r < 1000; ++r) worst = std::max(worst, std::abs(t->binned(tau, r) - g->binned(tau, r)));
    CHECK(worst <= 1e-3);
    CHECK(std::abs(t->fourier(1) - g->fourier(1)) <= 1e-6);
    CHECK(std::abs(t->fourier(0) - std::complex<double>(1e-3, 0.0)) < 1e-15);
    // The tabulated coefficient is the exact transform of its own binned profile.
    CHECK(std::abs(dft1(t->binned_profile(0.0)) - t->fourier(1)) < 1e-9);
}

TEST_CASE("pulse histogram file loading") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto good = dir / "ded_test_pulse_good.csv";
    const auto bad = dir / "ded_test_pulse_bad.csv";
    {
        std::ofstream(good) << "1\n2.5\n0\n4\n";
        std::ofstream(bad) << "1\nx\n0\n";
    }
    CHECK(load_pulse_histogram(good, 4) == std::vector<double>{1, 2.5, 0, 4});
    CHECK_THROWS_AS(load_pulse_histogram(good, 5), DataIntegrityError);
    CHECK_THROWS_AS(load_pulse_histogram(bad, 3), DataIntegrityError);
    CHECK_THROWS_AS(load_pulse_histogram(dir / "ded_test_no_such_file.csv", 3), DataIntegrityError);
    std::filesystem::remove(good);
    std::filesystem::remove(bad);
}

TEST_CASE("lidar rates, gradient and Hessian") {
    const LidarRateModel model(wrapped_gaussian(10.0, 1000), ThetaBox::defaults(1000));
    const Eigen::VectorXd theta0 = lidar_theta(1.0, 370.4, 0.003);
    const PhaseRates rates = model.evaluate(theta0, true);
    std::size_t peak = 0;
    for (std::size_t r = 0; r < 1000; ++r)
        if (rates.lambda[r] > rates.lambda[peak]) peak = r;
    CHECK((peak == 370 || peak == 371));
    CHECK(rates.lambda[370] == doctest::Approx(0.003 + model.pulse().binned(370.4, 370)).epsilon(1e-14));
    for (double l : rates.lambda) CHECK(l >= 0.003);

    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd th = lidar_theta(0.1 + 3 * rng.uniform(), 1000 * rng.uniform(), 1e-3 + 0.05 * rng.uniform());
        const PhaseRates pr = model.evaluate(th, true);
        for (std::int64_t r = 0; r < 1000; r += 37) {
            const auto lam = [&](const Eigen::VectorXd& x) {
                return model.evaluate_unchecked(x).lambda[static_cast<std::size_t>(r)];
            };
            const Eigen::VectorXd fd = oracle::fd_gradient(lam, th, 1e-5);
            const Eigen::VectorXd v = pr.grad_lambda.row(r).transpose();
            CHECK((fd - v).norm() <= 1e-6 * std::max(v.norm(), 1e-3));
            for (Eigen::Index i = 0; i < 3; ++i) {
                const auto grad_i = [&](const Eigen::VectorXd& x) {
                    return model.evaluate_unchecked(x).grad_lambda(r, i);
                };
                const Eigen::VectorXd hfd = oracle::fd_gradient(grad_i, th, 1e-5);
                const Eigen::VectorXd hrow = pr.hess_lambda[static_cast<std::size_t>(r)].row(i).transpose();
                CHECK((hfd - hrow).norm() <= 1e-5 * std::max(hrow.norm(), 1e-3));
            }
        }
    }
}

TEST_CASE("lidar box and projection") {
    const LidarRateModel model(wrapped_gaussian(10.0, 100), ThetaBox::defaults(100));
    CHECK_THROWS_AS(model.evaluate(lidar_theta(0.0, 10.0, 0.01)), DomainError);
    CHECK_THROWS_AS(model.evaluate(lidar_theta(1.0, 10.0, 2.0)), DomainError);
    ThetaBox broken = ThetaBox::defaults(100);
    broken.background.lo = 0.0;
    CHECK_THROWS_AS(LidarRateModel(wrapped_gaussian(10.0, 100), broken), DomainError);

    bool clamped = true;
    Eigen::VectorXd p = model.project(lidar_theta(1.0, 130.5, 0.01), &clamped);
    CHECK(p[kTau] == doctest::Approx(30.5));
    CHECK_FALSE(clamped);
    p = model.project(lidar_theta(1e-9, -0.5, 0.01), &clamped);
    CHECK(p[kAmp] == doctest::Approx(1e-3));
    CHECK(p[kTau] == doctest::Approx(99.5));
    CHECK(clamped);

    CHECK(circular_distance(1.0, 99.0, 100.0) == doctest::Approx(2.0));
    CHECK(circular_distance(370.4, 370.4 + 1000.0, 1000.0) == doctest::Approx(0.0));
    CHECK(wrap_phase(-0.25, 10.0) == doctest::Approx(9.75));
}

TEST_CASE("misspecified bump generator") {
    const LidarRateModel model(wrapped_gaussian(10.0, 1000), ThetaBox::defaults(1000));
    const Eigen::VectorXd theta0 = lidar_theta(1.0, 370.4, 0.003);
    const PhaseRates nominal = model.evaluate(theta0);
    const PhaseRates same = misspecified_rates(theta0, Bump{0.0, 1.0, 70.0}, model);
    CHECK(same.lambda == nominal.lambda);
    const PhaseRates bumped = misspecified_rates(theta0, Bump{0.15, 1.0, 70.0}, model);
    double peak = 0.0;
    std::size_t at = 0;
    for (std::size_t r = 0; r < 1000; ++r) {
        const double d = bumped.lambda[r] - nominal.lambda[r];
        CHECK(d >= 0.0);
        if (d > peak) peak = d, at = r;
    }
    CHECK(peak == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(std::abs(static_cast<double>(at) - 70.0) <= 1.0);
    CHECK_THROWS_AS(misspecified_rates(theta0, Bump{-0.1, 1.0, 70.0}, model), DomainError);
}
