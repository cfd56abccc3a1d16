// dedbench: experiments on dead-time event detection processes.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ded/bench.hpp"
#include "ded/errors.hpp"
#include "ded/event_stream.hpp"
#include "ded/inference.hpp"
#include "ded/simulate.hpp"

namespace {

enum Exit { ok = 0, generic = 1, config = 2, data = 3, conditioning = 4 };

// Flags that override config-file values.
struct Overrides {
    std::string config_path;
    std::optional<std::int64_t> K, D;
    std::optional<double> sigma, a, tau, b, bin_width_ns;
    std::string pulse_file, policy, metric;
    std::vector<double> bump;

    void add(CLI::App* app) {
        app->add_option("--config", config_path, "experiment config (INI); see --help-config");
        app->add_option("-K,--period", K, "bins per period");
        app->add_option("-D,--dead-time", D, "dead time in bins");
        app->add_option("--sigma", sigma, "wrapped-Gaussian pulse width in bins");
        app->add_option("--pulse-file", pulse_file, "tabulated pulse histogram (K lines)");
        app->add_option("--a", a, "signal amplitude a0");
        app->add_option("--tau", tau, "delay tau0 in bins");
        app->add_option("--b", b, "background rate b0 per bin");
        app->add_option("--policy", policy, "free_running | synchronous");
        app->add_option("--bin-width-ns", bin_width_ns, "bin width in ns");
        app->add_option("--metric", metric, "full | a_tau_only | tau_only");
        app->add_option("--bump", bump, "bump generator h,sigma_b,tau_b")->expected(3)->delimiter(',');
    }

    ded::ExperimentConfig apply() const {
        ded::ExperimentConfig c = config_path.empty() ? ded::ExperimentConfig{} : ded::load_config(config_path);
        if (K) c.K = *K;
        if (D) c.D = *D;
        if (sigma) c.pulse.kind = ded::PulseSpec::Kind::wrapped_gaussian, c.pulse.sigma = *sigma;
        if (!pulse_file.empty()) c.pulse.kind = ded::PulseSpec::Kind::tabulated, c.pulse.file = pulse_file;
        if (a) c.theta0[ded::kAmp] = *a;
        if (tau) c.theta0[ded::kTau] = *tau;
        if (b) c.theta0[ded::kBg] = *b;
        if (!policy.empty()) c.policy = ded::parse_policy_kind(policy);
        if (bin_width_ns) c.bin_width_ns = *bin_width_ns;
        if (!metric.empty()) c.metric = ded::parse_metric(metric);
        if (!bump.empty()) c.bump = ded::Bump{bump[0], bump[1], bump[2]};
        return c;
    }
};

std::ostream& output(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path);
    if (!file) throw ded::Error("cannot open " + path + " for writing");
    return file;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dead-time event detection: simulation, Fisher bounds and estimators"};
    app.require_subcommand(1);
    bool help_config = false;
    app.add_flag("--help-config", help_config, "print the config-file schema and exit");

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate an acquisition and write stream/stats files");
    Overrides sim_o;
    sim_o.add(sim);
    std::int64_t sim_T = 0;
    std::uint64_t sim_seed = 0;
    std::string sim_stream, sim_stats;
    sim->add_option("-T,--horizon", sim_T, "horizon in bins")->required();
    sim->add_option("--seed", sim_seed, "random seed")->required();
    sim->add_option("--stream", sim_stream, "write the detection stream here");
    sim->add_option("--stats", sim_stats, "write sufficient statistics here ('-' for stdout)");

    // bounds
    auto* bnd = app.add_subcommand("bounds", "Fisher lower bounds with and without dead time");
    Overrides bnd_o;
    bnd_o.add(bnd);
    std::optional<double> bnd_excess;
    std::int64_t bnd_dmax = 1000;
    std::string bnd_out;
    bnd->add_option("--threshold-excess", bnd_excess,
                    "also report the smallest D whose bound exceeds the dead-time-free one by this fraction");
    bnd->add_option("--threshold-dmax", bnd_dmax, "largest D searched for the threshold");
    bnd->add_option("-o,--out", bnd_out, "output JSON path");

    // mc
    auto* mc = app.add_subcommand("mc", "Monte Carlo risk curves");
    Overrides mc_o;
    mc_o.add(mc);
    std::uint64_t mc_seed = 0;
    std::vector<double> mc_horizons, mc_horizons_ns;
    std::optional<int> mc_reps, mc_threads;
    std::vector<std::string> mc_est;
    std::string mc_out, mc_format = "csv";
    mc->add_option("--seed", mc_seed, "master seed")->required();
    mc->add_option("--horizons", mc_horizons, "horizons in bins")->delimiter(',');
    mc->add_option("--horizons-ns", mc_horizons_ns, "horizons in ns")->delimiter(',');
    mc->add_option("--replicates", mc_reps, "replicates per horizon");
    mc->add_option("--estimators", mc_est, "estimator tags")->delimiter(',');
    mc->add_option("--threads", mc_threads, "worker threads (0 = all cores)");
    mc->add_option("-o,--out", mc_out, "output path (default stdout)");
    mc->add_option("--format", mc_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

    // estimate
    auto* est = app.add_subcommand("estimate", "estimate theta from a detection stream");
    Overrides est_o;
    est_o.add(est);
    std::string est_stream, est_tag = "ose_robust", est_out;
    est->add_option("--stream", est_stream, "detection stream file")->required();
    est->add_option("--estimator", est_tag, "estimator tag");
    est->add_option("-o,--out", est_out, "output JSON path");

    // gating
    auto* gat = app.add_subcommand("gating", "exact versus empirical gating frequencies");
    Overrides gat_o;
    gat_o.add(gat);
    std::int64_t gat_periods = 10000;
    std::uint64_t gat_seed = 1;
    std::string gat_out;
    gat->add_option("--periods", gat_periods, "simulated periods for the empirical column");
    gat->add_option("--seed", gat_seed, "random seed");
    gat->add_option("-o,--out", gat_out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        if (help_config) {
            std::cout << ded::config_schema();
            return ok;
        }
        app.exit(e);
        return config;
    }

    try {
        if (*sim) {
            ded::ExperimentConfig c = sim_o.apply();
            c.validate();
            const ded::ModelDims dims(c.K, c.D, sim_T);
            const ded::LidarRateModel model = c.make_model();
            const ded::PhaseRates rates =
                c.bump ? ded::misspecified_rates(c.theta0, *c.bump, model) : model.evaluate(c.theta0);
            auto policy = ded::make_policy(c.policy, dims);
            const ded::Trajectory traj = ded::simulate_rates(rates, *policy, dims, sim_seed);
            if (!sim_stream.empty())
                ded::save_event_stream(sim_stream, {dims, c.policy, ded::detection_bins(traj)});
            if (!sim_stats.empty() || sim_stream.empty()) {
                std::ofstream file;
                ded::write_stats_csv(output(sim_stats, file), ded::accumulate_stats(traj));
            }
        } else if (*bnd) {
            const ded::ExperimentConfig c = bnd_o.apply();
            const ded::BoundReport rep = ded::bounds_report(c);
            std::string json = rep.to_json();
            if (bnd_excess) {
                const ded::LidarRateModel model = c.make_model();
                const std::int64_t d = ded::dead_time_threshold(
                    model.evaluate(c.theta0), c.policy,
                    ded::risk_weight(c.theta0, c.K, c.bin_width_ns, c.metric), *bnd_excess, bnd_dmax);
                auto j = nlohmann::ordered_json::parse(json);
                j["threshold_excess"] = *bnd_excess;
                j["threshold_dead_time_bins"] = d;
                j["threshold_dead_time_ns"] = d < 0 ? -1.0 : static_cast<double>(d) * c.bin_width_ns;
                json = j.dump(2);
            }
            std::ofstream file;
            output(bnd_out, file) << json << '\n';
        } else if (*mc) {
            ded::ExperimentConfig c = mc_o.apply();
            c.master_seed = mc_seed;
            c.seed_set = true;
            if (!mc_horizons.empty() && !mc_horizons_ns.empty())
                throw ded::ConfigError("give either --horizons or --horizons-ns");
            if (!mc_horizons.empty() || !mc_horizons_ns.empty()) c.horizons.clear();
            for (double h : mc_horizons) c.horizons.push_back(std::llround(h));
            for (double h : mc_horizons_ns) c.horizons.push_back(std::llround(h / c.bin_width_ns));
            if (mc_reps) c.replicates = *mc_reps;
            if (!mc_est.empty()) c.estimators = mc_est;
            if (mc_threads) c.threads = *mc_threads;
            const auto rows = ded::run_mc(c);
            std::ofstream file;
            ded::emit(output(mc_out, file), rows,
                      mc_format == "json" ? ded::EmitFormat::json : ded::EmitFormat::csv);
        } else if (*est) {
            const ded::EventStream stream = ded::load_event_stream(est_stream);
            ded::ExperimentConfig c = est_o.apply();
            c.K = stream.dims.K;
            c.D = stream.dims.D;
            const ded::LidarRateModel model = c.make_model();
            const ded::EstimateReport rep =
                ded::estimate_from_stream(stream, model, est_tag, c.bin_width_ns, c.optimizer);
            std::ofstream file;
            output(est_out, file) << rep.to_json() << '\n';
        } else if (*gat) {
            const ded::ExperimentConfig c = gat_o.apply();
            c.validate();
            const ded::LidarRateModel model = c.make_model();
            const ded::PhaseRates rates = model.evaluate(c.theta0);
            const auto exact = ded::exact_gating_frequencies(rates, c.policy, c.D);
            const ded::ModelDims dims(c.K, c.D, gat_periods * c.K);
            auto policy = ded::make_policy(c.policy, dims);
            const std::int64_t horizon[] = {dims.T};
            const auto stats = ded::simulate_stats(rates, *policy, dims, horizon, gat_seed);
            const auto emp = ded::empirical_gating_frequencies(stats.front());
            std::ofstream file;
            std::ostream& out = output(gat_out, file);
            out << "r,exact,empirical\n";
            char buf[96];
            for (std::size_t r = 0; r < exact.gamma.size(); ++r) {
                std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r, exact.gamma[r], emp.gamma[r]);
                out << buf;
            }
        }
    } catch (const ded::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config;
    } catch (const ded::DataIntegrityError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data;
    } catch (const ded::ConditioningError& e) {
        std::cerr << "conditioning error: " << e.what() << '\n';
        return conditioning;
    } catch (const ded::DomainError& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return generic;
    }
    return ok;
}
