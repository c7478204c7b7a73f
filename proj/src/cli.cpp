#include <iostream>

#include <CLI11.hpp>

#include "cmerl/harness.hpp"

namespace cmerl {

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kConfigError = 2;

struct RunOverrides {
    bool strict = false;
    std::string out;
    std::string seeds;
    double beta_scale = -1.0;
    std::size_t parallel = 0;
};

void apply(const RunOverrides& o, ExperimentConfig& cfg) {
    if (o.strict) cfg.strict = true;
    if (!o.out.empty()) cfg.out = o.out;
    if (!o.seeds.empty()) cfg.seeds = parse_seed_list(o.seeds);
    if (o.beta_scale >= 0.0) cfg.beta_scale = o.beta_scale;
    if (o.parallel > 0) cfg.parallel = o.parallel;
    cfg.validate();
}

int cmd_run(const std::string& path, const RunOverrides& o) {
    ExperimentConfig cfg = load_config(path);
    apply(o, cfg);
    const auto runs = run_experiment(cfg);
    std::size_t failures = 0;
    if (cfg.out.empty()) {
        write_csv_header(std::cout);
        for (const auto& run : runs) write_csv_rows(std::cout, run);
    }
    for (const auto& run : runs) {
        failures += run.failures;
        std::cerr << "seed " << run.seed << ": cumulative regret " << run.cumulative_regret();
        if (run.uniform_regret) {
            std::cerr << " (uniform policy " << *run.uniform_regret * static_cast<double>(run.episodes.size()) << ")";
        }
        if (!run.episodes.empty()) std::cerr << ", bound " << run.episodes.back().bound;
        std::cerr << ", failed checks " << run.failures << "\n";
    }
    if (!cfg.out.empty()) std::cerr << "results written to " << cfg.out << "\n";
    return cfg.strict && failures > 0 ? kCheckFailed : kOk;
}

int cmd_info_gain(const std::string& path, const RunOverrides& o) {
    ExperimentConfig cfg = load_config(path);
    apply(o, cfg);
    cfg.checks = CheckSet{false, false, false, false};
    cfg.mc_rollouts = 2;
    const RunRecord run = run_single(cfg, cfg.seeds.front());
    std::cout << "N,info_gain\n";
    for (const auto& e : run.episodes) std::cout << e.step_count << ',' << e.info_gain << "\n";
    return kOk;
}

int cmd_list_envs() {
    for (const auto& name : standard_env_names()) {
        std::cout << name << "  " << make_standard_env(name)->description() << "\n";
    }
    std::cout << "(any path ending in .json is loaded as a finite MDP)\n";
    return kOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Kernel conditional-mean-embedding RL experiments"};
    app.require_subcommand(1);

    RunOverrides overrides;
    std::string config_path;
    auto add_overrides = [&](CLI::App* cmd) {
        cmd->add_flag("--strict", overrides.strict, "exit 1 when any check fails");
        cmd->add_option("--out", overrides.out, "output directory");
        cmd->add_option("--seeds", overrides.seeds, "comma-separated seed list");
        cmd->add_option("--beta-scale", overrides.beta_scale, "multiplier on the confidence width");
        cmd->add_option("--parallel", overrides.parallel, "worker threads");
    };

    auto* run = app.add_subcommand("run", "run experiments from a TOML or JSON config");
    run->add_option("config", config_path, "config file")->required();
    add_overrides(run);

    auto* info = app.add_subcommand("info-gain", "information gain against N for a config");
    info->add_option("config", config_path, "config file")->required();
    add_overrides(info);

    auto* list = app.add_subcommand("list-envs", "list the built-in environments");

    auto* verify = app.add_subcommand("verify", "oracle verification suites");
    verify->require_subcommand(1);
    ClosedFormOptions cf;
    auto* closed = verify->add_subcommand("closed-form", "closed-form optimistic value vs gradient ascent");
    closed->add_option("--instances", cf.instances, "number of random instances");
    closed->add_option("--seed", cf.seed, "instance generator seed");
    ConcentrationOptions co;
    auto* conc = verify->add_subcommand("concentration", "coverage of the confidence set");
    conc->add_option("--runs", co.runs, "number of seeded runs");
    conc->add_option("--episodes", co.episodes, "episodes per run");
    conc->add_option("--env", co.env, "environment");
    conc->add_option("--parallel", co.parallel, "worker threads");
    std::size_t inv_episodes = 30;
    std::size_t inv_seeds = 5;
    auto* inv = verify->add_subcommand("invariants", "optimism and variance-sum suites");
    inv->add_option("--episodes", inv_episodes, "episodes per run");
    inv->add_option("--seeds", inv_seeds, "runs per suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kConfigError;
    }

    try {
        if (*run) return cmd_run(config_path, overrides);
        if (*info) return cmd_info_gain(config_path, overrides);
        if (*list) return cmd_list_envs();
        if (*closed) {
            const VerifyReport r = verify_closed_form(cf);
            std::cout << r.message << "\n";
            return r.ok() ? kOk : kCheckFailed;
        }
        if (*conc) {
            if (co.runs < 1 || co.episodes < 1) throw ConfigError("--runs and --episodes must be >= 1");
            const ConcentrationReport r = verify_concentration(co);
            std::cout << "concentration held at every episode in " << r.covered_runs << "/" << r.runs
                      << " runs (" << 100.0 * r.coverage() << "%, required " << 100.0 * (1.0 - co.delta)
                      << "%)\n"
                      << "optimism violations: " << r.optimism_violations << " in " << r.checked_episodes
                      << " certified episodes\n"
                      << "variance-sum failures: " << r.varsum_failures
                      << ", regret-ceiling failures: " << r.bound_failures << "\n";
            const bool ok = r.coverage() >= 1.0 - co.delta && r.optimism_violations == 0 &&
                            r.varsum_failures == 0 && r.bound_failures == 0;
            return ok ? kOk : kCheckFailed;
        }
        if (*inv) {
            const InvariantReport r = verify_invariants(inv_episodes, inv_seeds);
            for (const auto& line : r.lines) std::cout << line << "\n";
            return r.failures == 0 ? kOk : kCheckFailed;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kCheckFailed;
    }
    std::cerr << app.help();
    return kConfigError;
}

}  // namespace cmerl
