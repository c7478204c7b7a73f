#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <toml.hpp>

#include "cmerl/harness.hpp"
#include "cmerl/oracles.hpp"

namespace cmerl {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
    }
}

std::uint64_t get_seed(const json& v) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    throw ConfigError("seeds must be nonnegative integers");
}

BonusMode mode_from_string(const std::string& s) {
    if (s == "well_specified" || s == "wellspecified") return BonusMode::WellSpecified;
    if (s == "misspecified") return BonusMode::Misspecified;
    throw ConfigError("mode must be 'well_specified' or 'misspecified', got '" + s + "'");
}

KernelSpec kernel_from_json(const json& k) {
    if (!k.is_object()) throw ConfigError("[kernel] must be a table");
    reject_unknown(k, {"family", "lengthscale", "nu", "output_scale"}, "[kernel]");
    KernelSpec spec;
    try {
        spec.family = kernel_family_from_string(get<std::string>(k, "family", "[kernel]"));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (k.contains("lengthscale")) spec.lengthscale = get<double>(k, "lengthscale", "[kernel]");
    if (k.contains("output_scale")) spec.output_scale = get<double>(k, "output_scale", "[kernel]");
    if (k.contains("nu")) {
        try {
            spec.nu = matern_nu_from_value(get<double>(k, "nu", "[kernel]"));
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    try {
        spec.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return spec;
}

ExperimentConfig from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("configuration must be a table");
    reject_unknown(j,
                   {"env", "env_file", "episodes", "seeds", "master_seed", "mode", "beta_scale",
                    "include_lambda_root", "parallel", "out", "checks", "strict", "mc_rollouts",
                    "record_wall_time", "kernel", "confidence", "approximation", "perturbation"},
                   "configuration");
    ExperimentConfig cfg;
    const std::string top = "configuration";
    if (j.contains("env") && j.contains("env_file")) throw ConfigError("set only one of 'env' and 'env_file'");
    if (j.contains("env")) cfg.env = get<std::string>(j, "env", top);
    if (j.contains("env_file")) cfg.env = get<std::string>(j, "env_file", top);
    if (j.contains("episodes")) {
        const auto e = get<long long>(j, "episodes", top);
        if (e < 1) throw ConfigError("episodes must be >= 1");
        cfg.episodes = static_cast<std::size_t>(e);
    }
    if (j.contains("seeds")) {
        const auto& s = j.at("seeds");
        if (!s.is_array()) throw ConfigError("seeds must be a list");
        cfg.seeds.clear();
        for (const auto& v : s) cfg.seeds.push_back(get_seed(v));
    }
    if (j.contains("master_seed")) cfg.master_seed = get_seed(j.at("master_seed"));
    if (j.contains("mode")) cfg.mode = mode_from_string(get<std::string>(j, "mode", top));
    if (j.contains("beta_scale")) cfg.beta_scale = get<double>(j, "beta_scale", top);
    if (j.contains("include_lambda_root")) cfg.include_lambda_root = get<bool>(j, "include_lambda_root", top);
    if (j.contains("parallel")) {
        const auto p = get<long long>(j, "parallel", top);
        if (p < 1) throw ConfigError("parallel must be >= 1");
        cfg.parallel = static_cast<std::size_t>(p);
    }
    if (j.contains("out")) cfg.out = get<std::string>(j, "out", top);
    if (j.contains("strict")) cfg.strict = get<bool>(j, "strict", top);
    if (j.contains("mc_rollouts")) {
        const auto m = get<long long>(j, "mc_rollouts", top);
        if (m < 2) throw ConfigError("mc_rollouts must be >= 2");
        cfg.mc_rollouts = static_cast<std::size_t>(m);
    }
    if (j.contains("record_wall_time")) cfg.record_wall_time = get<bool>(j, "record_wall_time", top);
    if (j.contains("checks")) {
        const auto& c = j.at("checks");
        if (!c.is_array()) throw ConfigError("checks must be a list");
        cfg.checks = CheckSet{false, false, false, false};
        for (const auto& v : c) {
            if (!v.is_string()) throw ConfigError("checks must be strings");
            const auto name = v.get<std::string>();
            if (name == "optimism") cfg.checks.optimism = true;
            else if (name == "variance_sum") cfg.checks.variance_sum = true;
            else if (name == "concentration") cfg.checks.concentration = true;
            else if (name == "closed_form") cfg.checks.closed_form = true;
            else throw ConfigError("unknown check '" + name + "'");
        }
    }
    if (j.contains("kernel")) cfg.kernel = kernel_from_json(j.at("kernel"));
    if (j.contains("confidence")) {
        const auto& c = j.at("confidence");
        const std::string where = "[confidence]";
        if (!c.is_object()) throw ConfigError("[confidence] must be a table");
        reject_unknown(c, {"lambda", "delta", "b_p", "b_v", "b_phi", "zeta", "one_norm"}, where);
        if (c.contains("lambda")) cfg.lambda = get<double>(c, "lambda", where);
        if (c.contains("delta")) cfg.delta = get<double>(c, "delta", where);
        if (c.contains("b_p")) cfg.b_p = get<double>(c, "b_p", where);
        if (c.contains("b_v")) cfg.b_v = get<double>(c, "b_v", where);
        if (c.contains("b_phi")) cfg.b_phi = get<double>(c, "b_phi", where);
        if (c.contains("zeta")) cfg.zeta = get<double>(c, "zeta", where);
        if (c.contains("one_norm")) cfg.one_norm = get<double>(c, "one_norm", where);
    }
    if (j.contains("approximation")) {
        const auto& a = j.at("approximation");
        const std::string where = "[approximation]";
        if (!a.is_object()) throw ConfigError("[approximation] must be a table");
        reject_unknown(a, {"kind", "features", "seed"}, where);
        ApproximationSpec spec;
        const auto kind = get<std::string>(a, "kind", where);
        if (kind == "random_fourier" || kind == "rff") spec.kind = SketchKind::RandomFourier;
        else if (kind == "nystrom") spec.kind = SketchKind::Nystrom;
        else throw ConfigError("approximation kind must be 'random_fourier' or 'nystrom'");
        if (a.contains("features")) {
            const auto m = get<long long>(a, "features", where);
            if (m < 1) throw ConfigError("approximation features must be >= 1");
            spec.features = static_cast<std::size_t>(m);
        }
        if (a.contains("seed")) spec.seed = get_seed(a.at("seed"));
        cfg.approximation = spec;
    }
    if (j.contains("perturbation")) {
        const auto& p = j.at("perturbation");
        const std::string where = "[perturbation]";
        if (!p.is_object()) throw ConfigError("[perturbation] must be a table");
        reject_unknown(p, {"zeta", "seed"}, where);
        if (p.contains("zeta")) cfg.perturbation = get<double>(p, "zeta", where);
        if (p.contains("seed")) cfg.perturbation_seed = get_seed(p.at("seed"));
    }
    cfg.validate();
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (env.empty()) throw ConfigError("env must be set");
    if (episodes < 1) throw ConfigError("episodes must be >= 1");
    if (seeds.empty()) throw ConfigError("seeds must be nonempty");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
    if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
    auto positive = [](const std::optional<double>& v) { return !v || (*v > 0.0 && std::isfinite(*v)); };
    if (!positive(b_p) || !positive(b_v) || !positive(b_phi)) {
        throw ConfigError("b_p, b_v and b_phi must be positive");
    }
    if (zeta && !(*zeta >= 0.0)) throw ConfigError("zeta must be nonnegative");
    if (one_norm && !(*one_norm >= 0.0)) throw ConfigError("one_norm must be nonnegative");
    if (!(beta_scale >= 0.0) || !std::isfinite(beta_scale)) throw ConfigError("beta_scale must be nonnegative");
    if (!(perturbation >= 0.0)) throw ConfigError("perturbation zeta must be nonnegative");
    if (parallel < 1) throw ConfigError("parallel must be >= 1");
    if (mc_rollouts < 2) throw ConfigError("mc_rollouts must be >= 2");
    if (approximation && approximation->kind == SketchKind::RandomFourier &&
        approximation->features % 2 != 0) {
        throw ConfigError("random Fourier features need an even feature count");
    }
    std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
    if (unique.size() != seeds.size()) throw ConfigError("seeds must be distinct");
}

ExperimentConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid JSON config: ") + e.what());
    }
    return from_json(j);
}

ExperimentConfig parse_config_toml(const std::string& text) {
    toml::table tbl;
    try {
        tbl = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "invalid TOML config: " << e.description() << " at line " << e.source().begin.line;
        throw ConfigError(msg.str());
    }
    std::ostringstream as_json;
    as_json << toml::json_formatter{tbl};
    return parse_config_json(as_json.str());
}

ExperimentConfig load_config(const std::string& path) {
    const std::string text = read_file(path);
    ExperimentConfig cfg = ends_with(path, ".json") ? parse_config_json(text) : parse_config_toml(text);
    if (const char* env_seed = std::getenv("CMERL_SEED")) {
        try {
            std::size_t used = 0;
            const std::string s(env_seed);
            cfg.master_seed = std::stoull(s, &used);
            if (used != s.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ConfigError("CMERL_SEED must be a nonnegative integer");
        }
    }
    return cfg;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            if (item.empty() || item[0] == '-') throw std::invalid_argument("negative");
            seeds.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ConfigError("bad seed list '" + text + "'");
        }
    }
    if (seeds.empty()) throw ConfigError("seed list is empty");
    return seeds;
}

KernelSpec resolve_kernel(const ExperimentConfig& cfg, const Environment& env) {
    if (cfg.kernel) return *cfg.kernel;
    return env.finite() ? KernelSpec::delta() : KernelSpec::squared_exponential(1.0);
}

ConfidenceConfig resolve_confidence(const ExperimentConfig& cfg, const Environment& env,
                                    const KernelSpec& kernel) {
    ConfidenceConfig c;
    c.lambda = cfg.lambda;
    c.delta = cfg.delta;
    const double horizon = static_cast<double>(env.horizon());
    const FiniteMdp* mdp = env.finite();

    // Largest squared norm of a state-action input, for the linear kernel.
    double sup_sq_norm = 2.0;
    if (const auto* cont = dynamic_cast<const NonlinearGaussianEnv*>(&env)) {
        const double box = cont->params().box;
        sup_sq_norm = static_cast<double>(env.state_dimension()) * box * box + 1.0;
    }
    const double sup_k = kernel.family == KernelFamily::Linear ? kernel.output_scale * sup_sq_norm
                                                               : kernel.output_scale;
    c.b_phi = cfg.b_phi.value_or(std::sqrt(sup_k));

    if (mdp) {
        // One-hot psi: ||V|| <= H sqrt(S), ||1|| = sqrt(S).  With a Delta kernel
        // of scale c the operator norm picks up a factor 1/sqrt(c).
        const double s = static_cast<double>(mdp->num_states);
        double hs = mdp->embedding_hs_norm();
        if (kernel.family == KernelFamily::Delta) hs /= std::sqrt(kernel.output_scale);
        c.b_p = cfg.b_p.value_or(hs);
        c.b_v = cfg.b_v.value_or(horizon * std::sqrt(s));
        c.one_norm = cfg.one_norm.value_or(std::sqrt(s));
    } else {
        c.b_p = cfg.b_p.value_or(1.0);
        c.b_v = cfg.b_v.value_or(horizon);
        c.one_norm = cfg.one_norm.value_or(1.0);
    }
    c.zeta = cfg.zeta.value_or(cfg.perturbation);
    c.validate();
    return c;
}

double theoretical_bound(const ConfidenceConfig& cfg, bool misspecified, std::size_t horizon,
                         const EmbeddingModel& model, std::size_t episodes) {
    return regret_bound(cfg, horizon, episodes * horizon, model.info_gain(), misspecified);
}

}  // namespace cmerl
