#include "ded/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "ded/errors.hpp"

namespace ded {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInvSqrt2 = 0.70710678118654752440;

// Standard normal mass between z-scores lo < hi, accurate in both tails.
double normal_mass(double lo, double hi) {
    if (lo >= 0.0) return 0.5 * (std::erfc(lo * kInvSqrt2) - std::erfc(hi * kInvSqrt2));
    if (hi <= 0.0) return 0.5 * (std::erfc(-hi * kInvSqrt2) - std::erfc(-lo * kInvSqrt2));
    return 0.5 * (std::erf(hi * kInvSqrt2) - std::erf(lo * kInvSqrt2));
}

double wrap_into_period(double x, double K) { return x - K * std::floor(x / K); }

double sinc(double u) {
    if (u == 0.0) return 1.0;
    return std::sin(kPi * u) / (kPi * u);
}

// Beyond 40 sigma the Gaussian is below the smallest double.
constexpr double kNegligibleZ = 40.0;

}  // namespace

std::vector<double> PulseTemplate::binned_profile(double tau) const {
    std::vector<double> out(static_cast<std::size_t>(period_));
    for (std::int64_t r = 0; r < period_; ++r) out[static_cast<std::size_t>(r)] = binned(tau, r);
    return out;
}

// ---------------------------------------------------------------------------
// WrappedGaussian

WrappedGaussian::WrappedGaussian(double sigma, std::int64_t period)
    : PulseTemplate(period), sigma_(sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw DomainError("pulse width sigma must be positive, got " + std::to_string(sigma));
    if (period < 1) throw DomainError("period K must be >= 1");
    // Covers +-(8 sigma / K + 2) periods, past the 1e-15 relative tail.
    wraps_ = static_cast<int>(std::ceil(8.0 * sigma / static_cast<double>(period))) + 2;
}

double WrappedGaussian::density(double x) const {
    const double K = static_cast<double>(period());
    const double x0 = wrap_into_period(x, K);
    const double norm = 1.0 / (std::sqrt(2.0 * kPi) * sigma_);
    double sum = 0.0;
    for (int l = -wraps_ - 1; l <= wraps_; ++l) {
        const double z = (x0 + l * K) / sigma_;
        if (std::abs(z) > kNegligibleZ) continue;
        sum += norm * std::exp(-0.5 * z * z);
    }
    return sum;
}

double WrappedGaussian::density_derivative(double x) const {
    const double K = static_cast<double>(period());
    const double x0 = wrap_into_period(x, K);
    const double norm = 1.0 / (std::sqrt(2.0 * kPi) * sigma_);
    double sum = 0.0;
    for (int l = -wraps_ - 1; l <= wraps_; ++l) {
        const double z = (x0 + l * K) / sigma_;
        if (std::abs(z) > kNegligibleZ) continue;
        sum -= norm * z / sigma_ * std::exp(-0.5 * z * z);
    }
    return sum;
}

double WrappedGaussian::binned(double tau, std::int64_t r) const {
    const double K = static_cast<double>(period());
    const double x0 = wrap_into_period(tau - static_cast<double>(r), K);
    double sum = 0.0;
    for (int l = -wraps_ - 1; l <= wraps_; ++l) {
        const double lo = (x0 + l * K) / sigma_;
        const double hi = (x0 + l * K + 1.0) / sigma_;
        if (lo > kNegligibleZ || hi < -kNegligibleZ) continue;
        sum += normal_mass(lo, hi);
    }
    return sum;
}

std::complex<double> WrappedGaussian::fourier(std::int64_t m) const {
    const double K = static_cast<double>(period());
    const double u = static_cast<double>(m) / K;
    const double c = std::exp(-2.0 * kPi * kPi * u * u * sigma_ * sigma_) / K;
    return c * std::polar(1.0, kPi * u) * sinc(u);
}

// ---------------------------------------------------------------------------
// TabulatedTemplate

TabulatedTemplate::TabulatedTemplate(std::span<const double> histogram, std::int64_t period)
    : PulseTemplate(period) {
    if (period < 1) throw DomainError("period K must be >= 1");
    if (static_cast<std::int64_t>(histogram.size()) != period)
        throw DomainError("pulse histogram has " + std::to_string(histogram.size()) +
                          " entries, expected K = " + std::to_string(period));
    double total = 0.0;
    for (std::size_t j = 0; j < histogram.size(); ++j) {
        if (!std::isfinite(histogram[j]) || histogram[j] < 0.0)
            throw DomainError("pulse histogram entry " + std::to_string(j) +
                              " is negative or not finite");
        total += histogram[j];
    }
    if (!(total > 0.0)) throw DomainError("pulse histogram is identically zero");

    const auto K = static_cast<std::size_t>(period);
    std::vector<double> mass(K);
    for (std::size_t j = 0; j < K; ++j) mass[j] = histogram[j] / total;

    cdf_.assign(K + 1, 0.0);
    for (std::size_t j = 0; j < K; ++j) cdf_[j + 1] = cdf_[j] + mass[j];
    cdf_[K] = 1.0;

    // Unit knot spacing, so the secant slopes are the bin masses. Harmonic
    // mean of neighbouring secants, zero at local extrema of the density.
    auto harmonic = [](double left, double right) {
        if (left <= 0.0 || right <= 0.0) return 0.0;
        return 2.0 / (1.0 / left + 1.0 / right);
    };
    slope_.assign(K + 1, 0.0);
    for (std::size_t j = 1; j < K; ++j) slope_[j] = harmonic(mass[j - 1], mass[j]);
    slope_[0] = slope_[K] = harmonic(mass[K - 1], mass[0]);

    // Circular centre from the first moment, then RMS circular distance.
    std::complex<double> z{0.0, 0.0};
    const double Kd = static_cast<double>(period);
    for (std::size_t j = 0; j < K; ++j)
        z += mass[j] * std::polar(1.0, 2.0 * kPi * (static_cast<double>(j) + 0.5) / Kd);
    const double centre = wrap_into_period(std::arg(z) * Kd / (2.0 * kPi), Kd);
    double var = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
        double d = std::abs(static_cast<double>(j) + 0.5 - centre);
        d = std::fmod(d, Kd);
        d = std::min(d, Kd - d);
        var += mass[j] * d * d;
    }
    width_ = std::sqrt(var);
}

void TabulatedTemplate::locate(double u, std::int64_t& wraps, std::int64_t& cell, double& s) const {
    const double K = static_cast<double>(period());
    const double w = std::floor(u / K);
    double u0 = u - w * K;
    wraps = static_cast<std::int64_t>(w);
    if (u0 >= K) u0 = 0.0, ++wraps;
    if (u0 < 0.0) u0 = 0.0;
    cell = std::min<std::int64_t>(static_cast<std::int64_t>(u0), period() - 1);
    s = u0 - static_cast<double>(cell);
}

double TabulatedTemplate::cumulative(double u) const {
    std::int64_t wraps = 0, cell = 0;
    double s = 0.0;
    locate(u, wraps, cell, s);
    const auto j = static_cast<std::size_t>(cell);
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return static_cast<double>(wraps) + h00 * cdf_[j] + h10 * slope_[j] + h01 * cdf_[j + 1] +
           h11 * slope_[j + 1];
}

double TabulatedTemplate::arrival_density(double u) const {
    std::int64_t wraps = 0, cell = 0;
    double s = 0.0;
    locate(u, wraps, cell, s);
    const auto j = static_cast<std::size_t>(cell);
    const double s2 = s * s;
    const double d00 = 6 * s2 - 6 * s;
    const double d10 = 3 * s2 - 4 * s + 1;
    const double d01 = -6 * s2 + 6 * s;
    const double d11 = 3 * s2 - 2 * s;
    // Clamp the roundoff-level negatives a monotone spline can produce.
    return std::max(0.0, d00 * cdf_[j] + d10 * slope_[j] + d01 * cdf_[j + 1] + d11 * slope_[j + 1]);
}

double TabulatedTemplate::arrival_density_derivative(double u) const {
    std::int64_t wraps = 0, cell = 0;
    double s = 0.0;
    locate(u, wraps, cell, s);
    const auto j = static_cast<std::size_t>(cell);
    return (12 * s - 6) * cdf_[j] + (6 * s - 4) * slope_[j] + (-12 * s + 6) * cdf_[j + 1] +
           (6 * s - 2) * slope_[j + 1];
}

// The histogram is f_0 itself, so f(x) = g(1 - x) with g the arrival density.
double TabulatedTemplate::density(double x) const { return arrival_density(1.0 - x); }

double TabulatedTemplate::density_derivative(double x) const {
    return -arrival_density_derivative(1.0 - x);
}

double TabulatedTemplate::binned(double tau, std::int64_t r) const {
    const double u = static_cast<double>(r) - tau;
    return std::max(0.0, cumulative(u + 1.0) - cumulative(u));  // CDF is monotone
}

std::complex<double> TabulatedTemplate::fourier(std::int64_t m) const {
    const double K = static_cast<double>(period());
    if (m == 0) return {1.0 / K, 0.0};
    using Gauss = boost::math::quadrature::gauss<double, 16>;
    const double omega = 2.0 * kPi * static_cast<double>(m) / K;
    // c_m = (1/K) exp(-i omega) * integral over one period of g(u) exp(i omega u).
    double re = 0.0, im = 0.0;
    // Gauss nodes are interior, so each rule sees a single spline cell.
    for (std::int64_t j = 0; j < period(); ++j) {
        const double a = static_cast<double>(j);
        re += Gauss::integrate([&](double u) { return arrival_density(u) * std::cos(omega * u); },
                               a, a + 1.0);
        im += Gauss::integrate([&](double u) { return arrival_density(u) * std::sin(omega * u); },
                               a, a + 1.0);
    }
    const std::complex<double> c = std::polar(1.0, -omega) * std::complex<double>(re, im) / K;
    const double u = static_cast<double>(m) / K;
    return c * std::polar(1.0, kPi * u) * sinc(u);
}

// ---------------------------------------------------------------------------

std::shared_ptr<const PulseTemplate> wrapped_gaussian(double sigma, std::int64_t period) {
    return std::make_shared<WrappedGaussian>(sigma, period);
}

std::shared_ptr<const PulseTemplate> tabulated_template(std::span<const double> histogram,
                                                        std::int64_t period) {
    return std::make_shared<TabulatedTemplate>(histogram, period);
}

std::vector<double> load_pulse_histogram(const std::filesystem::path& path, std::int64_t period) {
    std::ifstream in(path);
    if (!in) throw DataIntegrityError("cannot open pulse file " + path.string());
    std::vector<double> counts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(line.substr(b), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        const auto rest = line.find_first_not_of(" \t\r,", b + used);
        if (used == 0 || rest != std::string::npos)
            throw DataIntegrityError(path.string() + ":" + std::to_string(line_no) +
                                     ": not a number: '" + line + "'");
        if (value < 0.0)
            throw DataIntegrityError(path.string() + ":" + std::to_string(line_no) +
                                     ": negative pulse count");
        counts.push_back(value);
    }
    if (static_cast<std::int64_t>(counts.size()) != period)
        throw DataIntegrityError(path.string() + ": expected " + std::to_string(period) +
                                 " pulse counts, found " + std::to_string(counts.size()));
    return counts;
}

}  // namespace ded
