#include "ded/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ded/errors.hpp"
#include "ded/rng.hpp"
#include "ded/simulate.hpp"

namespace ded {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Pieces shared between estimators on one data set.
struct Cache {
    const SufficientStats& stats;
    const LidarRateModel& model;
    const OptimizerSettings& settings;
    std::optional<RateEstimates> est;
    std::optional<GatingFrequencies> gamma;
    std::optional<EstimateReport> fourier, robust, coates, quadratic;

    const RateEstimates& rates() {
        if (!est) est = rate_estimates(stats);
        return *est;
    }
    const GatingFrequencies& gamma_hat() {
        if (!gamma) gamma = empirical_gating_frequencies(stats);
        return *gamma;
    }
    const EstimateReport& fourier_pilot_() {
        if (!fourier) fourier = fourier_pilot(rates(), model);
        return *fourier;
    }
    const EstimateReport& robust_pilot_() {
        if (!robust) robust = robust_pilot(rates(), model);
        return *robust;
    }
    const EstimateReport& coates_filled() {
        if (!coates) coates = fill_amplitude_background(stats, model, coates_max_bin(rates()), settings);
        return *coates;
    }
    const EstimateReport& quadratic_filled() {
        if (!quadratic)
            quadratic = fill_amplitude_background(stats, model, quadratic_peak_fit(rates()), settings);
        return *quadratic;
    }
};

// A fallback returns the pilot unchanged, so a pilot that was clamped onto the
// box keeps that status (the missing bound still shows the singularity).
EstimateReport one_step_from(Cache& cache, const EstimateReport& pilot) {
    EstimateReport rep = one_step(cache.stats, cache.model, pilot.theta, cache.gamma_hat());
    if (rep.status == EstimateStatus::fisher_singular_fallback &&
        pilot.status == EstimateStatus::projected_to_box)
        rep.status = EstimateStatus::projected_to_box;
    return rep;
}

EstimateReport estimate_one(Cache& cache, std::string_view tag) {
    EstimateReport rep;
    if (tag == "fourier") {
        rep = cache.fourier_pilot_();
    } else if (tag == "robust") {
        rep = cache.robust_pilot_();
    } else if (tag == "mle_fourier") {
        rep = mle(cache.stats, cache.model, cache.fourier_pilot_().theta, cache.settings);
    } else if (tag == "mle_robust") {
        rep = mle(cache.stats, cache.model, cache.robust_pilot_().theta, cache.settings);
    } else if (tag == "ose_fourier") {
        rep = one_step_from(cache, cache.fourier_pilot_());
    } else if (tag == "ose_robust") {
        rep = one_step_from(cache, cache.robust_pilot_());
    } else if (tag == "coates_max_bin") {
        rep = cache.coates_filled();
    } else if (tag == "quadratic_peak") {
        rep = cache.quadratic_filled();
    } else if (tag == "ose_coates") {
        rep = one_step_from(cache, cache.coates_filled());
    } else if (tag == "ose_quadratic") {
        rep = one_step_from(cache, cache.quadratic_filled());
    } else {
        throw ConfigError("unknown estimator '" + std::string(tag) + "'");
    }
    rep.method = std::string(tag);
    return rep;
}

// Pairwise summation in index order, so the result does not depend on how
// the values were produced.
double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::string_view to_string(Metric metric) noexcept {
    switch (metric) {
        case Metric::full: return "full";
        case Metric::a_tau_only: return "a_tau_only";
        case Metric::tau_only: return "tau_only";
    }
    return "unknown";
}

Metric parse_metric(std::string_view text) {
    if (text == "full") return Metric::full;
    if (text == "a_tau_only") return Metric::a_tau_only;
    if (text == "tau_only") return Metric::tau_only;
    throw ConfigError("unknown metric '" + std::string(text) + "'");
}

const std::vector<std::string>& estimator_tags() {
    static const std::vector<std::string> tags{
        "fourier",     "robust",     "mle_fourier",    "mle_robust", "ose_fourier",
        "ose_robust",  "coates_max_bin", "quadratic_peak", "ose_coates", "ose_quadratic"};
    return tags;
}

double relative_mse(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta0,
                    std::int64_t K, Metric metric) {
    const double Kd = static_cast<double>(K);
    const double ea = (theta_hat[kAmp] - theta0[kAmp]) / theta0[kAmp];
    const double et = circular_distance(theta_hat[kTau], theta0[kTau], Kd) / Kd;
    const double eb = (theta_hat[kBg] - theta0[kBg]) / theta0[kBg];
    switch (metric) {
        case Metric::full: return ea * ea + et * et + eb * eb;
        case Metric::a_tau_only: return ea * ea + et * et;
        case Metric::tau_only: return et * et;
    }
    return kNaN;
}

Eigen::MatrixXd risk_weight(const Eigen::VectorXd& theta0, std::int64_t K, double bin_width,
                            Metric metric) {
    Eigen::Vector3d w;
    const double Kd = static_cast<double>(K);
    w << 1.0 / (theta0[kAmp] * theta0[kAmp]), 1.0 / (Kd * Kd), 1.0 / (theta0[kBg] * theta0[kBg]);
    if (metric != Metric::full) w[kBg] = 0.0;
    if (metric == Metric::tau_only) w[kAmp] = 0.0;
    return bin_width * Eigen::MatrixXd(w.asDiagonal());
}

EstimatorOutputs run_estimators(const SufficientStats& stats, const LidarRateModel& model,
                                const std::vector<std::string>& tags,
                                const OptimizerSettings& settings) {
    Cache cache{stats, model, settings, {}, {}, {}, {}, {}, {}};
    EstimatorOutputs out;
    out.reports.resize(tags.size());
    for (std::size_t i = 0; i < tags.size(); ++i) {
        try {
            out.reports[i] = estimate_one(cache, tags[i]);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error&) {
            out.reports[i].reset();
        }
    }
    return out;
}

std::vector<RiskRow> run_mc(const ExperimentConfig& config, int threads_override) {
    config.validate();
    if (config.horizons.empty()) throw ConfigError("no horizons configured");
    if (config.estimators.empty()) throw ConfigError("no estimators configured");

    const LidarRateModel model = config.make_model();
    const PhaseRates nominal = model.evaluate(config.theta0);
    const PhaseRates generator =
        config.bump ? misspecified_rates(config.theta0, *config.bump, model) : nominal;
    const ModelDims dims(config.K, config.D, config.horizons.back());

    // Bounds are properties of the nominal model at theta0.
    const Eigen::MatrixXd W = risk_weight(config.theta0, config.K, config.bin_width_ns, config.metric);
    const GatingFrequencies gamma = exact_gating_frequencies(nominal, config.policy, config.D);
    const double bound = fisher_lower_bound(information_rate(nominal, gamma.gamma), W);
    const std::vector<double> ones(static_cast<std::size_t>(config.K), 1.0);
    const double bound_td0 = fisher_lower_bound(information_rate(nominal, ones), W);

    const std::size_t H = config.horizons.size();
    const std::size_t E = config.estimators.size();
    const auto R = static_cast<std::size_t>(config.replicates);
    std::vector<double> err(H * E * R, kNaN);  // [h][e][rep]

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        try {
            auto policy = make_policy(config.policy, dims);
            for (std::size_t rep = next++; rep < R; rep = next++) {
                Rng stream = Rng::stream(config.master_seed, rep);
                const std::uint64_t seed = stream();
                const auto snaps = simulate_stats(generator, *policy, dims, config.horizons, seed);
                for (std::size_t h = 0; h < H; ++h) {
                    const auto out = run_estimators(snaps[h], model, config.estimators, config.optimizer);
                    for (std::size_t e = 0; e < E; ++e) {
                        if (!out.reports[e]) continue;
                        const double v =
                            relative_mse(out.reports[e]->theta, config.theta0, config.K, config.metric);
                        if (std::isfinite(v)) err[(h * E + e) * R + rep] = v;
                    }
                }
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = R;
        }
    };
    int threads = threads_override > 0 ? threads_override : config.threads;
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), R));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<RiskRow> rows;
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t e = 0; e < E; ++e) {
            std::vector<double> ok;
            for (std::size_t rep = 0; rep < R; ++rep) {
                const double v = err[(h * E + e) * R + rep];
                if (!std::isnan(v)) ok.push_back(v);
            }
            RiskRow row;
            row.T_bins = config.horizons[h];
            row.T_phys = static_cast<double>(row.T_bins) * config.bin_width_ns;
            row.estimator = config.estimators[e];
            row.successes = static_cast<int>(ok.size());
            row.failures = static_cast<int>(R - ok.size());
            const double n = static_cast<double>(ok.size());
            row.mean_rel_mse = ok.empty() ? kNaN : pairwise_sum(ok.data(), ok.size()) / n;
            if (ok.size() > 1) {
                std::vector<double> dev(ok.size());
                for (std::size_t i = 0; i < ok.size(); ++i)
                    dev[i] = (ok[i] - row.mean_rel_mse) * (ok[i] - row.mean_rel_mse);
                row.stderr_ = std::sqrt(pairwise_sum(dev.data(), dev.size()) / (n - 1.0) / n);
            }
            row.scaled_risk = row.T_phys * row.mean_rel_mse;
            row.bound = bound;
            row.bound_td0 = bound_td0;
            rows.push_back(std::move(row));
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const RiskRow& a, const RiskRow& b) {
        if (a.T_bins != b.T_bins) return a.T_bins < b.T_bins;
        return a.estimator < b.estimator;
    });
    return rows;
}

BoundReport bounds_report(const ExperimentConfig& config) {
    config.validate();
    const LidarRateModel model = config.make_model();
    const PhaseRates rates = model.evaluate(config.theta0);
    const GatingFrequencies gamma = exact_gating_frequencies(rates, config.policy, config.D);
    return bound_report(rates, gamma,
                        risk_weight(config.theta0, config.K, config.bin_width_ns, config.metric));
}

std::int64_t dead_time_threshold(const PhaseRates& rates, PolicyKind policy,
                                 const Eigen::MatrixXd& W, double excess, std::int64_t D_max) {
    const std::vector<double> ones(static_cast<std::size_t>(rates.K()), 1.0);
    const double free = fisher_lower_bound(information_rate(rates, ones), W);
    for (std::int64_t D = 0; D <= D_max; ++D) {
        const GatingFrequencies g = exact_gating_frequencies(rates, policy, D);
        const double aware = fisher_lower_bound(information_rate(rates, g.gamma), W);
        if (aware > (1.0 + excess) * free) return D;
    }
    return -1;
}

EstimateReport estimate_from_stream(const EventStream& stream, const LidarRateModel& model,
                                    std::string_view tag, double bin_width_ns,
                                    const OptimizerSettings& settings) {
    if (stream.dims.K != model.period())
        throw DataIntegrityError("stream has K = " + std::to_string(stream.dims.K) +
                                 " but the pulse template has K = " + std::to_string(model.period()));
    const SufficientStats stats = ingest_event_stream(stream);
    Cache cache{stats, model, settings, {}, {}, {}, {}, {}, {}};
    EstimateReport rep = estimate_one(cache, tag);

    const PhaseRates rates = model.evaluate(rep.theta);
    rep.fisher = information_rate(rates, cache.gamma_hat().gamma);
    try {
        rep.bound = fisher_lower_bound(*rep.fisher, risk_weight(rep.theta, model.period(), bin_width_ns));
    } catch (const ConditioningError&) {
        rep.bound.reset();
    }
    return rep;
}

void emit(std::ostream& out, const std::vector<RiskRow>& rows, EmitFormat format) {
    if (format == EmitFormat::csv) {
        out << "T_bins,T_phys,estimator,mean_rel_mse,stderr,scaled_risk,bound,bound_td0,failures\n";
        for (const auto& r : rows)
            out << r.T_bins << ',' << fmt(r.T_phys) << ',' << r.estimator << ',' << fmt(r.mean_rel_mse)
                << ',' << fmt(r.stderr_) << ',' << fmt(r.scaled_risk) << ',' << fmt(r.bound) << ','
                << fmt(r.bound_td0) << ',' << r.failures << '\n';
        return;
    }
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["T_bins"] = r.T_bins;
        j["T_phys"] = r.T_phys;
        j["estimator"] = r.estimator;
        j["mean_rel_mse"] = r.mean_rel_mse;
        j["stderr"] = r.stderr_;
        j["scaled_risk"] = r.scaled_risk;
        j["bound"] = r.bound;
        j["bound_td0"] = r.bound_td0;
        j["failures"] = r.failures;
        arr.push_back(std::move(j));
    }
    out << arr.dump(2) << '\n';
}

void emit(const std::filesystem::path& path, const std::vector<RiskRow>& rows, EmitFormat format) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    emit(out, rows, format);
    out.flush();
    if (!out) throw Error("write failed: " + path.string());
}

std::vector<RiskRow> read_risk_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) ||
        line != "T_bins,T_phys,estimator,mean_rel_mse,stderr,scaled_risk,bound,bound_td0,failures")
        throw DataIntegrityError("risk table has an unexpected header");
    std::vector<RiskRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 9) throw DataIntegrityError("malformed risk row '" + line + "'");
        try {
            RiskRow r;
            r.T_bins = std::stoll(f[0]);
            r.T_phys = std::stod(f[1]);
            r.estimator = f[2];
            r.mean_rel_mse = std::stod(f[3]);
            r.stderr_ = std::stod(f[4]);
            r.scaled_risk = std::stod(f[5]);
            r.bound = std::stod(f[6]);
            r.bound_td0 = std::stod(f[7]);
            r.failures = std::stoi(f[8]);
            rows.push_back(std::move(r));
        } catch (const std::exception&) {
            throw DataIntegrityError("malformed risk row '" + line + "'");
        }
    }
    return rows;
}

}  // namespace ded
