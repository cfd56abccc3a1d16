#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ded/estimators.hpp"
#include "ded/event_stream.hpp"
#include "ded/gating.hpp"
#include "ded/inference.hpp"
#include "ded/lidar.hpp"

namespace ded {

struct PulseSpec {
    enum class Kind { wrapped_gaussian, tabulated };
    Kind kind = Kind::wrapped_gaussian;
    double sigma = 10.0;          // bins, wrapped Gaussian
    std::filesystem::path file;   // tabulated histogram, K lines
};

/// Which coordinates enter the relative MSE.
enum class Metric { full, a_tau_only, tau_only };
std::string_view to_string(Metric metric) noexcept;
Metric parse_metric(std::string_view text);

/// Estimator tags understood by run_mc and estimate_from_stream.
const std::vector<std::string>& estimator_tags();

struct ExperimentConfig {
    std::int64_t K = 1000;
    std::int64_t D = 500;
    PulseSpec pulse;
    Eigen::VectorXd theta0 = lidar_theta(1.0, 370.4, 0.003);
    PolicyKind policy = PolicyKind::free_running;
    std::vector<std::int64_t> horizons;  // bins, strictly increasing
    int replicates = 100;
    std::vector<std::string> estimators{"robust", "ose_robust"};
    std::optional<Bump> bump;  // nominal generator when empty
    std::uint64_t master_seed = 0;
    bool seed_set = false;
    std::optional<ThetaBox> box;  // ThetaBox::defaults(K) when empty
    double bin_width_ns = 0.1;    // axis scaling only
    Metric metric = Metric::full;
    int threads = 0;              // 0: hardware concurrency
    OptimizerSettings optimizer;

    ThetaBox theta_box() const { return box ? *box : ThetaBox::defaults(K); }
    std::shared_ptr<const PulseTemplate> make_pulse() const;
    LidarRateModel make_model() const;
    /// Throws ConfigError on any violated invariant.
    void validate() const;
};

/// INI-style config; see `dedbench --help-config` for the schema.
/// Throws ConfigError.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Schema description printed by the CLI.
std::string_view config_schema();

/// ((a-a0)/a0)^2 + (d_K(tau, tau0)/K)^2 + ((b-b0)/b0)^2, with terms dropped
/// according to `metric`.
double relative_mse(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta0,
                    std::int64_t K, Metric metric = Metric::full);

/// W = Delta diag(a0^-2, K^-2, b0^-2), zeroing the coordinates that `metric`
/// ignores.
Eigen::MatrixXd risk_weight(const Eigen::VectorXd& theta0, std::int64_t K, double bin_width,
                            Metric metric = Metric::full);

struct RiskRow {
    std::int64_t T_bins = 0;
    double T_phys = 0.0;
    std::string estimator;
    double mean_rel_mse = 0.0;
    double stderr_ = 0.0;
    double scaled_risk = 0.0;
    double bound = 0.0;
    double bound_td0 = 0.0;
    int failures = 0;
    int successes = 0;
};

/// Runs every configured estimator on `stats`. Entries are empty where the
/// estimator threw.
struct EstimatorOutputs {
    std::vector<std::optional<EstimateReport>> reports;  // parallel to tags
};
EstimatorOutputs run_estimators(const SufficientStats& stats, const LidarRateModel& model,
                                const std::vector<std::string>& tags,
                                const OptimizerSettings& settings);

/// Monte Carlo risk table, sorted by horizon then estimator tag.
/// `threads_override` > 0 replaces config.threads.
std::vector<RiskRow> run_mc(const ExperimentConfig& config, int threads_override = 0);

/// Bounds at theta0 with the exact-chain gamma of the configured policy.
BoundReport bounds_report(const ExperimentConfig& config);

/// Smallest D in [0, D_max] whose dead-time-aware bound exceeds the
/// dead-time-free bound by the factor (1 + excess); -1 if none.
std::int64_t dead_time_threshold(const PhaseRates& rates, PolicyKind policy,
                                 const Eigen::MatrixXd& W, double excess, std::int64_t D_max);

/// ingest -> stats -> gamma_hat -> estimator -> Fisher matrix and bound at
/// the estimate.
EstimateReport estimate_from_stream(const EventStream& stream, const LidarRateModel& model,
                                    std::string_view tag, double bin_width_ns,
                                    const OptimizerSettings& settings = {});

enum class EmitFormat { csv, json };
void emit(std::ostream& out, const std::vector<RiskRow>& rows, EmitFormat format);
void emit(const std::filesystem::path& path, const std::vector<RiskRow>& rows, EmitFormat format);
/// Parses the CSV written by emit(); `successes` is not stored and stays 0.
std::vector<RiskRow> read_risk_csv(std::istream& in);

}  // namespace ded
