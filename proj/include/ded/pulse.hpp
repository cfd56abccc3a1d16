#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace ded {

/// K-periodic pulse density f (unit mass per period) and its binned form
///
///     f_tau(r) = integral of f over [tau - r, tau - r + 1],
///
/// so that d/dtau f_tau(r) = f(tau - r + 1) - f(tau - r).
class PulseTemplate {
public:
    explicit PulseTemplate(std::int64_t period) : period_(period) {}
    virtual ~PulseTemplate() = default;

    std::int64_t period() const noexcept { return period_; }

    virtual double density(double x) const = 0;
    virtual double density_derivative(double x) const = 0;

    virtual double binned(double tau, std::int64_t r) const = 0;
    double binned_tau_derivative(double tau, std::int64_t r) const {
        const double x = tau - static_cast<double>(r);
        return density(x + 1.0) - density(x);
    }
    double binned_tau_second_derivative(double tau, std::int64_t r) const {
        const double x = tau - static_cast<double>(r);
        return density_derivative(x + 1.0) - density_derivative(x);
    }

    /// f_tau(r) for r = 0..K-1.
    std::vector<double> binned_profile(double tau) const;

    /// Binned Fourier coefficient d_m = c_m exp(i pi m / K) sinc(m / K), with
    /// c_m the m-th Fourier coefficient of f over one period.
    virtual std::complex<double> fourier(std::int64_t m) const = 0;

    /// Circular RMS width of the pulse in bins.
    virtual double width() const = 0;

private:
    std::int64_t period_;
};

/// f(x) = sum over l of phi_sigma(x + l K).
class WrappedGaussian final : public PulseTemplate {
public:
    /// Throws DomainError unless sigma > 0 and K >= 1.
    WrappedGaussian(double sigma, std::int64_t period);

    double sigma() const noexcept { return sigma_; }

    double density(double x) const override;
    double density_derivative(double x) const override;
    double binned(double tau, std::int64_t r) const override;
    std::complex<double> fourier(std::int64_t m) const override;
    double width() const override { return sigma_; }

private:
    double sigma_;
    int wraps_;  // wrap terms on each side of the principal period
};

/// Template calibrated from a length-K histogram. The histogram is read as
/// the binned template at tau = 0, i.e. f_0(r) = h_r / sum(h). Its cumulative
/// sum is interpolated by a periodic monotone cubic Hermite spline
/// (Fritsch-Carlson slopes), which yields a continuous nonnegative density.
class TabulatedTemplate final : public PulseTemplate {
public:
    /// Throws DomainError for wrong length, negative or non-finite entries,
    /// or an all-zero histogram.
    TabulatedTemplate(std::span<const double> histogram, std::int64_t period);

    double density(double x) const override;
    double density_derivative(double x) const override;
    double binned(double tau, std::int64_t r) const override;
    std::complex<double> fourier(std::int64_t m) const override;
    double width() const override { return width_; }

    /// Interpolated cumulative mass G(u) in arrival coordinates,
    /// G(u + K) = G(u) + 1.
    double cumulative(double u) const;

private:
    // Density and slope of the spline in arrival coordinates u.
    double arrival_density(double u) const;
    double arrival_density_derivative(double u) const;
    void locate(double u, std::int64_t& wraps, std::int64_t& cell, double& s) const;

    std::vector<double> cdf_;    // K + 1 knots at u = 0..K
    std::vector<double> slope_;  // K + 1 knot slopes
    double width_ = 0.0;
};

std::shared_ptr<const PulseTemplate> wrapped_gaussian(double sigma, std::int64_t period);
std::shared_ptr<const PulseTemplate> tabulated_template(std::span<const double> histogram,
                                                        std::int64_t period);

/// d_m of `pulse`; see PulseTemplate::fourier.
inline std::complex<double> fourier_coefficient(const PulseTemplate& pulse, std::int64_t m) {
    return pulse.fourier(m);
}

/// Calibrated-pulse CSV: one nonnegative count per line, exactly K lines.
std::vector<double> load_pulse_histogram(const std::filesystem::path& path, std::int64_t period);

}  // namespace ded
