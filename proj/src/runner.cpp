#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cmerl/harness.hpp"
#include "cmerl/oracles.hpp"
#include "cmerl/sketched_model.hpp"

namespace cmerl {

const char* to_string(CheckStatus status) {
    switch (status) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::Skip: return "skip";
    }
    return "skip";
}

namespace {

using Clock = std::chrono::steady_clock;

std::unique_ptr<EmbeddingModel> make_model(const ExperimentConfig& cfg, const Environment& env,
                                           const KernelSpec& kernel, std::uint64_t run_seed) {
    if (!cfg.approximation) return std::make_unique<CmeModel>(kernel, cfg.lambda);
    const auto& spec = *cfg.approximation;
    const std::uint64_t seed = derive_seed(spec.seed, "sketch", run_seed);
    const std::size_t input_dim = env.state_dimension() + env.num_actions();
    if (spec.kind == SketchKind::RandomFourier) {
        return std::make_unique<SketchedCmeModel>(
            FeatureSketch::random_fourier(kernel, input_dim, spec.features, seed), cfg.lambda);
    }
    Rng rng(seed);
    return std::make_unique<SketchedCmeModel>(
        FeatureSketch::nystrom(kernel, env.sample_inputs(spec.features, rng)), cfg.lambda);
}

// Fixed +-zeta offsets: one random sign per state on finite environments,
// the sign of the first coordinate on continuous ones.
TargetPerturbation make_perturbation(const ExperimentConfig& cfg, const Environment& env) {
    if (cfg.perturbation <= 0.0) return {};
    const double zeta = cfg.perturbation;
    if (const auto* fin = dynamic_cast<const FiniteEnv*>(&env)) {
        Rng rng(derive_seed(cfg.perturbation_seed, env.name(), 0));
        std::bernoulli_distribution coin(0.5);
        std::vector<double> table(fin->mdp().num_states);
        for (auto& x : table) x = coin(rng) ? zeta : -zeta;
        return [fin, table](const Point& s) { return table[fin->state_index(s)]; };
    }
    return [zeta](const Point& s) { return s(0) >= 0.0 ? zeta : -zeta; };
}

// Certainty-equivalent planner on the noise-free dynamics with exhaustive
// lookahead over the remaining steps; the reference policy for continuous
// environments.
class LookaheadPlanner {
public:
    explicit LookaheadPlanner(const NonlinearGaussianEnv& env) : env_(env) {}

    std::size_t act(std::size_t h, const Point& s) const {
        std::size_t best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < env_.num_actions(); ++a) {
            const double v = env_.reward(s, a) + value(h + 1, env_.mean_next_state(s, a));
            if (v > best_v) {
                best_v = v;
                best = a;
            }
        }
        return best;
    }

private:
    double value(std::size_t h, const Point& s) const {
        if (h > env_.horizon()) return 0.0;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < env_.num_actions(); ++a) {
            best = std::max(best, env_.reward(s, a) + value(h + 1, env_.mean_next_state(s, a)));
        }
        return best;
    }

    const NonlinearGaussianEnv& env_;
};

using StepPolicy = std::function<std::size_t(std::size_t, const Point&)>;

// Returns of `policy` over `rollouts` episodes; rollout r always draws its
// noise from the same stream so two policies are compared on common noise.
std::vector<double> rollout_returns(const Environment& env, const StepPolicy& policy,
                                    std::size_t rollouts, std::uint64_t seed) {
    std::vector<double> out(rollouts, 0.0);
    for (std::size_t r = 0; r < rollouts; ++r) {
        Rng rng(derive_seed(seed, "rollout", r));
        Point s = env.reset(1);
        for (std::size_t h = 1; h <= env.horizon(); ++h) {
            const StepResult step = env.step(s, policy(h, s), rng);
            out[r] += step.reward;
            s = step.next_state;
        }
    }
    return out;
}

std::pair<double, double> mean_and_stderr(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double var = x.size() > 1 ? ss / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

std::string fmt(double x) {
    std::ostringstream out;
    out << std::setprecision(12) << x;
    return out.str();
}

std::string seed_file(const std::string& dir, std::uint64_t seed) {
    return (std::filesystem::path(dir) / ("seed_" + std::to_string(seed) + ".csv")).string();
}

}  // namespace

RunRecord run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::unique_ptr<Environment> env_ptr;
    try {
        env_ptr = resolve_env(cfg.env);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    const Environment& env = *env_ptr;
    const KernelSpec kernel = resolve_kernel(cfg, env);
    const ConfidenceConfig conf = resolve_confidence(cfg, env, kernel);
    const std::size_t H = env.horizon();
    const bool misspecified = cfg.mode == BonusMode::Misspecified;

    AgentConfig ac;
    ac.horizon = H;
    ac.mode = cfg.mode;
    ac.confidence = conf;
    ac.actions = env.actions();
    ac.include_lambda_root = cfg.include_lambda_root;
    ac.beta_scale = cfg.beta_scale;
    ac.target_perturbation = make_perturbation(cfg, env);
    const std::uint64_t run_seed = derive_seed(cfg.master_seed, env.name(), seed);
    CmeRlAgent agent(ac, make_model(cfg, env, kernel, run_seed));
    Rng rng(run_seed);
    const RewardFn reward = [&env](const Point& s, std::size_t a) { return env.reward(s, a); };

    RunRecord run;
    run.seed = seed;
    run.env = env.name();

    const auto* fin = dynamic_cast<const FiniteEnv*>(&env);
    const bool tabular = fin && kernel.family == KernelFamily::Delta && !cfg.approximation;
    std::optional<DpSolution> dp;
    std::optional<FiniteEmbeddingModel> fem;
    if (fin) {
        const FiniteMdp& mdp = fin->mdp();
        dp = solve_dp(mdp);
        const auto uniform = evaluate_policy(mdp, uniform_policy(mdp));
        run.uniform_regret = dp->v_at(1, mdp.initial_state) - uniform[0](static_cast<Eigen::Index>(mdp.initial_state));
        for (std::size_t s = 0; s < mdp.num_states; ++s) agent.track_state(fin->state_point(s));
        if (tabular) fem.emplace(mdp, cfg.lambda, kernel.output_scale);
    }

    // Continuous environments: reference value from the lookahead planner.
    const auto* cont = dynamic_cast<const NonlinearGaussianEnv*>(&env);
    const std::uint64_t eval_seed = derive_seed(run_seed, "evaluation", 0);
    std::vector<double> reference;
    if (cont) {
        LookaheadPlanner planner(*cont);
        reference = rollout_returns(
            env, [&planner](std::size_t h, const Point& s) { return planner.act(h, s); },
            cfg.mc_rollouts, eval_seed);
    }

    const double slack_zeta = misspecified ? cfg.perturbation : 0.0;
    double var_sum = 0.0;
    double cum = 0.0;
    for (std::size_t t = 1; t <= cfg.episodes; ++t) {
        const auto start = Clock::now();
        EpisodeRecord rec;
        rec.seed = seed;
        rec.episode = t;
        rec.step_count = t * H;

        agent.begin_episode(t, reward);
        rec.beta = agent.beta();

        if (fin) {
            const FiniteMdp& mdp = fin->mdp();
            Policy policy(H, std::vector<std::size_t>(mdp.num_states, 0));
            for (std::size_t h = 1; h <= H; ++h) {
                for (std::size_t s = 0; s < mdp.num_states; ++s) {
                    policy[h - 1][s] = agent.select_action(h, fin->state_point(s)).first;
                }
            }
            rec.inst_regret = regret_term(mdp, *dp, policy);

            if (tabular && (cfg.checks.concentration || cfg.checks.optimism)) {
                rec.conc_beta = beta(agent.model(), conf, t, H, conf.delta);
                const ConcentrationResult cr = concentration_check(*fem, rec.conc_beta);
                rec.conc_lhs = cr.lhs;
                if (cfg.checks.concentration) rec.concentration = cr.holds ? CheckStatus::Pass : CheckStatus::Fail;
                // Optimism is only claimed on the event that the true operator
                // lies in the confidence set the agent actually uses.
                if (cfg.checks.optimism && cr.lhs <= agent.beta()) {
                    double gap = std::numeric_limits<double>::infinity();
                    for (std::size_t h = 1; h <= H; ++h) {
                        const double slack = 2.0 * static_cast<double>(H - h) * slack_zeta;
                        for (std::size_t s = 0; s < mdp.num_states; ++s) {
                            for (std::size_t a = 0; a < mdp.num_actions; ++a) {
                                const double q = agent.q_value(h, fin->state_point(s), a);
                                gap = std::min(gap, q + slack - dp->q_at(h, s, a));
                            }
                        }
                    }
                    rec.optimism_gap = gap;
                    rec.optimism = gap >= -1e-8 ? CheckStatus::Pass : CheckStatus::Fail;
                }
            }
        } else if (cont) {
            const auto agent_returns = rollout_returns(
                env, [&agent](std::size_t h, const Point& s) { return agent.select_action(h, s).first; },
                cfg.mc_rollouts, eval_seed);
            std::vector<double> diff(reference.size());
            for (std::size_t r = 0; r < diff.size(); ++r) diff[r] = reference[r] - agent_returns[r];
            const auto [mean, se] = mean_and_stderr(diff);
            rec.inst_regret = mean;
            rec.regret_stderr = se;
        }

        const PolicyTrace trace = agent.play_episode(env, rng);
        for (const auto& st : trace) {
            var_sum += st.variance / conf.lambda;
            rec.episode_return += st.reward;
        }
        if (fem) {
            const auto& buf = agent.model().buffer();
            for (std::size_t i = buf.size() - trace.size(); i < buf.size(); ++i) fem->add(buf[i]);
        }

        rec.var_sum = var_sum;
        rec.info_gain = agent.model().info_gain();
        if (cfg.checks.variance_sum) {
            const double rhs = (1.0 + conf.b_phi * conf.b_phi * static_cast<double>(H) / conf.lambda) *
                               agent.model().log_det();
            rec.varsum = var_sum <= rhs + 1e-8 ? CheckStatus::Pass : CheckStatus::Fail;
        }
        cum += rec.inst_regret;
        rec.cum_regret = cum;
        rec.bound = theoretical_bound(conf, misspecified, H, agent.model(), t);
        if (fin && cum > rec.bound) run.bound_ok = false;
        if (cfg.record_wall_time) {
            rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        }
        for (CheckStatus c : {rec.optimism, rec.varsum, rec.concentration}) {
            if (c == CheckStatus::Fail) ++run.failures;
        }
        run.episodes.push_back(rec);
    }
    if (!run.bound_ok) ++run.failures;
    return run;
}

void write_csv_header(std::ostream& out) {
    out << "seed,episode,step_count,inst_regret,cum_regret,beta,info_gain,var_sum,bound,"
           "check_optimism,check_varsum,check_conc,wall_ms\n";
}

void write_csv_rows(std::ostream& out, const RunRecord& run) {
    for (const auto& r : run.episodes) {
        out << r.seed << ',' << r.episode << ',' << r.step_count << ',' << fmt(r.inst_regret) << ','
            << fmt(r.cum_regret) << ',' << fmt(r.beta) << ',' << fmt(r.info_gain) << ','
            << fmt(r.var_sum) << ',' << fmt(r.bound) << ',' << to_string(r.optimism) << ','
            << to_string(r.varsum) << ',' << to_string(r.concentration) << ',' << fmt(r.wall_ms)
            << '\n';
    }
}

std::string summary_json(const ExperimentConfig& cfg, const std::vector<RunRecord>& runs) {
    nlohmann::json j;
    j["env"] = cfg.env;
    j["episodes"] = cfg.episodes;
    j["master_seed"] = cfg.master_seed;
    j["mode"] = cfg.mode == BonusMode::Misspecified ? "misspecified" : "well_specified";
    j["beta_scale"] = cfg.beta_scale;
    nlohmann::json list = nlohmann::json::array();
    double mean_regret = 0.0;
    double mean_uniform = 0.0;
    bool have_uniform = true;
    std::size_t failures = 0;
    for (const auto& run : runs) {
        nlohmann::json r;
        r["seed"] = run.seed;
        r["cum_regret"] = run.cumulative_regret();
        if (run.uniform_regret) {
            r["uniform_cum_regret"] = *run.uniform_regret * static_cast<double>(run.episodes.size());
            mean_uniform += *run.uniform_regret * static_cast<double>(run.episodes.size());
        } else {
            have_uniform = false;
        }
        if (!run.episodes.empty()) {
            r["final_bound"] = run.episodes.back().bound;
            r["final_info_gain"] = run.episodes.back().info_gain;
            r["final_var_sum"] = run.episodes.back().var_sum;
        }
        r["bound_ok"] = run.bound_ok;
        r["failures"] = run.failures;
        failures += run.failures;
        mean_regret += run.cumulative_regret();
        list.push_back(r);
    }
    const double n = runs.empty() ? 1.0 : static_cast<double>(runs.size());
    j["runs"] = list;
    j["mean_cum_regret"] = mean_regret / n;
    if (have_uniform && !runs.empty()) j["mean_uniform_cum_regret"] = mean_uniform / n;
    j["failures"] = failures;
    return j.dump(2) + "\n";
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    // Surface environment and constant problems before any worker starts.
    {
        std::unique_ptr<Environment> env;
        try {
            env = resolve_env(cfg.env);
            const KernelSpec kernel = resolve_kernel(cfg, *env);
            (void)resolve_confidence(cfg, *env, kernel);
            if (cfg.approximation && cfg.approximation->kind == SketchKind::RandomFourier &&
                (kernel.family == KernelFamily::Delta || kernel.family == KernelFamily::Linear)) {
                throw ConfigError("random Fourier features need a squared exponential or Matern kernel");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    if (!cfg.out.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(cfg.out, ec);
        if (ec) throw ConfigError("cannot create output directory '" + cfg.out + "'");
    }

    std::vector<RunRecord> runs(cfg.seeds.size());
    std::vector<std::exception_ptr> errors(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
            try {
                runs[i] = run_single(cfg, cfg.seeds[i]);
                if (!cfg.out.empty()) {
                    std::ofstream f(seed_file(cfg.out, cfg.seeds[i]));
                    write_csv_header(f);
                    write_csv_rows(f, runs[i]);
                    if (!f) throw Error("cannot write per-seed results");
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::min(cfg.parallel, cfg.seeds.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    if (!cfg.out.empty()) {
        std::ofstream merged(std::filesystem::path(cfg.out) / "results.csv");
        write_csv_header(merged);
        for (std::uint64_t seed : cfg.seeds) {
            std::ifstream part(seed_file(cfg.out, seed));
            std::string line;
            std::getline(part, line);  // header
            while (std::getline(part, line)) merged << line << '\n';
        }
        std::ofstream summary(std::filesystem::path(cfg.out) / "summary.json");
        summary << summary_json(cfg, runs);
        if (!merged || !summary) throw Error("cannot write results to '" + cfg.out + "'");
    }
    return runs;
}

}  // namespace cmerl
