#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ded/bench.hpp"
#include "ded/errors.hpp"

namespace ded {
namespace {

namespace pt = boost::property_tree;

template <class T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
    // ptree::get(key, default) silently returns the default on bad data.
    const auto child = tree.get_child_optional(key);
    if (!child) return fallback;
    if (const auto value = child->get_value_optional<T>()) return *value;
    throw ConfigError("cannot parse value of " + key + ": '" + child->data() + "'");
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_number(const std::string& text, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse number '" + text + "' in " + key);
    }
}

}  // namespace

std::string_view config_schema() {
    return R"(Experiment config (INI; every key optional unless noted):

  [model]
  K            = 1000            bins per period
  D            = 500             dead time in bins
  policy       = free_running    free_running | synchronous
  bin_width_ns = 0.1             physical bin width (axis scaling and W only)

  [pulse]
  kind  = wrapped_gaussian       wrapped_gaussian | tabulated
  sigma = 10                     pulse width in bins (wrapped_gaussian)
  file  = pulse.csv              K nonnegative counts, one per line (tabulated)

  [theta0]
  a = 1
  tau = 370.4
  b = 0.003

  [box]                          defaults: a in [1e-3, 1e3], tau in [0, K], b in [1e-6, 1]
  a_min, a_max, tau_min, tau_max, b_min, b_max

  [generator]
  kind    = nominal              nominal | bump
  h       = 0.15                 bump height (peak rate added)
  sigma_b = 1                    bump width in bins
  tau_b   = 70                   bump centre in bins

  [mc]
  horizons    = 1e5, 1e6         horizons in bins, strictly increasing
  horizons_ns = 1e4, 1e5         alternative: horizons in ns (converted with bin_width_ns)
  replicates  = 100
  estimators  = robust, ose_robust
  seed        = 12345            master seed (or --seed)
  metric      = full             full | a_tau_only | tau_only
  threads     = 0                0 = hardware concurrency

  [optimizer]
  max_evals     = 1000
  rel_param_tol = 1e-8
  rel_obj_tol   = 1e-10

Estimator tags: fourier, robust, mle_fourier, mle_robust, ose_fourier,
ose_robust, coates_max_bin, quadratic_peak, ose_coates, ose_quadratic.
)";
}

ExperimentConfig parse_config(std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    static const std::vector<std::string> sections{"model", "pulse", "theta0", "box",
                                                   "generator", "mc", "optimizer"};
    for (const auto& [name, _] : tree)
        if (std::find(sections.begin(), sections.end(), name) == sections.end())
            throw ConfigError("unknown config section [" + name + "]");

    ExperimentConfig c;
    c.K = get<std::int64_t>(tree, "model.K", c.K);
    c.D = get<std::int64_t>(tree, "model.D", c.D);
    c.policy = parse_policy_kind(get<std::string>(tree, "model.policy", "free_running"));
    c.bin_width_ns = get<double>(tree, "model.bin_width_ns", c.bin_width_ns);

    const std::string kind = get<std::string>(tree, "pulse.kind", "wrapped_gaussian");
    if (kind == "wrapped_gaussian")
        c.pulse.kind = PulseSpec::Kind::wrapped_gaussian;
    else if (kind == "tabulated")
        c.pulse.kind = PulseSpec::Kind::tabulated;
    else
        throw ConfigError("unknown pulse kind '" + kind + "'");
    c.pulse.sigma = get<double>(tree, "pulse.sigma", c.pulse.sigma);
    c.pulse.file = get<std::string>(tree, "pulse.file", "");

    c.theta0 = lidar_theta(get<double>(tree, "theta0.a", c.theta0[kAmp]),
                           get<double>(tree, "theta0.tau", c.theta0[kTau]),
                           get<double>(tree, "theta0.b", c.theta0[kBg]));

    if (tree.get_child_optional("box")) {
        ThetaBox box = ThetaBox::defaults(c.K);
        box.amplitude.lo = get<double>(tree, "box.a_min", box.amplitude.lo);
        box.amplitude.hi = get<double>(tree, "box.a_max", box.amplitude.hi);
        box.delay.lo = get<double>(tree, "box.tau_min", box.delay.lo);
        box.delay.hi = get<double>(tree, "box.tau_max", box.delay.hi);
        box.background.lo = get<double>(tree, "box.b_min", box.background.lo);
        box.background.hi = get<double>(tree, "box.b_max", box.background.hi);
        c.box = box;
    }

    const std::string gen = get<std::string>(tree, "generator.kind", "nominal");
    if (gen == "bump") {
        Bump b;
        b.height = get<double>(tree, "generator.h", 0.15);
        b.sigma = get<double>(tree, "generator.sigma_b", 1.0);
        b.centre = get<double>(tree, "generator.tau_b", 70.0);
        c.bump = b;
    } else if (gen != "nominal") {
        throw ConfigError("unknown generator kind '" + gen + "'");
    }

    const auto horizons = tree.get_optional<std::string>("mc.horizons");
    const auto horizons_ns = tree.get_optional<std::string>("mc.horizons_ns");
    if (horizons && horizons_ns) throw ConfigError("give either mc.horizons or mc.horizons_ns");
    if (horizons)
        for (const auto& h : split_list(*horizons))
            c.horizons.push_back(std::llround(parse_number(h, "mc.horizons")));
    if (horizons_ns)
        for (const auto& h : split_list(*horizons_ns))
            c.horizons.push_back(std::llround(parse_number(h, "mc.horizons_ns") / c.bin_width_ns));
    c.replicates = get<int>(tree, "mc.replicates", c.replicates);
    if (const auto est = tree.get_optional<std::string>("mc.estimators")) c.estimators = split_list(*est);
    if (const auto seed = tree.get_optional<std::string>("mc.seed")) {
        c.master_seed = get<std::uint64_t>(tree, "mc.seed", 0);
        c.seed_set = true;
    }
    c.metric = parse_metric(get<std::string>(tree, "mc.metric", "full"));
    c.threads = get<int>(tree, "mc.threads", c.threads);

    c.optimizer.max_evals = get<int>(tree, "optimizer.max_evals", c.optimizer.max_evals);
    c.optimizer.rel_param_tol = get<double>(tree, "optimizer.rel_param_tol", c.optimizer.rel_param_tol);
    c.optimizer.rel_obj_tol = get<double>(tree, "optimizer.rel_obj_tol", c.optimizer.rel_obj_tol);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        return parse_config(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::shared_ptr<const PulseTemplate> ExperimentConfig::make_pulse() const {
    if (pulse.kind == PulseSpec::Kind::wrapped_gaussian) return wrapped_gaussian(pulse.sigma, K);
    if (pulse.file.empty()) throw ConfigError("tabulated pulse needs pulse.file");
    const std::vector<double> counts = load_pulse_histogram(pulse.file, K);
    return tabulated_template(counts, K);
}

LidarRateModel ExperimentConfig::make_model() const { return LidarRateModel(make_pulse(), theta_box()); }

void ExperimentConfig::validate() const {
    try {
        ModelDims(K, D, 0);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    if (!(bin_width_ns > 0.0)) throw ConfigError("bin_width_ns must be positive");
    if (pulse.kind == PulseSpec::Kind::wrapped_gaussian && !(pulse.sigma > 0.0))
        throw ConfigError("pulse.sigma must be positive");
    if (pulse.kind == PulseSpec::Kind::tabulated && pulse.file.empty())
        throw ConfigError("tabulated pulse needs pulse.file");
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (horizons[i] < K) throw ConfigError("each horizon must cover at least one period");
        if (i > 0 && horizons[i] <= horizons[i - 1])
            throw ConfigError("horizons must be strictly increasing");
    }
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
    for (const auto& tag : estimators)
        if (std::find(estimator_tags().begin(), estimator_tags().end(), tag) == estimator_tags().end())
            throw ConfigError("unknown estimator '" + tag + "'");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (optimizer.max_evals < 1 || !(optimizer.rel_param_tol > 0.0) || !(optimizer.rel_obj_tol > 0.0))
        throw ConfigError("optimizer settings must be positive");
    if (bump && !(bump->height >= 0.0 && bump->sigma > 0.0))
        throw ConfigError("bump needs h >= 0 and sigma_b > 0");
    const ThetaBox b = theta_box();
    try {
        const LidarRateModel model(wrapped_gaussian(1.0, K), b);
        if (!model.in_box(theta0)) throw ConfigError("theta0 lies outside the parameter box");
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid parameter box: ") + e.what());
    }
}

}  // namespace ded
