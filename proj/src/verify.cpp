#include <cmath>
#include <random>
#include <sstream>

#include "cmerl/harness.hpp"
#include "cmerl/oracles.hpp"

namespace cmerl {

namespace {

FiniteMdp random_mdp(std::size_t states, std::size_t actions, Rng& rng) {
    FiniteMdp mdp(states, actions, 1, 0);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t s = 0; s < states; ++s) {
        for (std::size_t a = 0; a < actions; ++a) {
            std::vector<double> w(states);
            double total = 0.0;
            for (auto& x : w) total += (x = gamma(rng) + 1e-3);
            double acc = 0.0;
            for (std::size_t next = 0; next + 1 < states; ++next) acc += (mdp.p(s, a, next) = w[next] / total);
            mdp.p(s, a, states - 1) = 1.0 - acc;
            if (mdp.p(s, a, states - 1) < 0.0) mdp.p(s, a, states - 1) = 0.0;
            mdp.rewards(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = unit(rng);
        }
    }
    return mdp;
}

}  // namespace

VerifyReport verify_closed_form(const ClosedFormOptions& options) {
    VerifyReport report;
    report.total = options.instances;
    std::ostringstream first_failure;
    for (std::size_t i = 0; i < options.instances; ++i) {
        Rng rng(derive_seed(options.seed, "closed-form", i));
        std::uniform_int_distribution<std::size_t> pick_s(1, 4);
        std::uniform_int_distribution<std::size_t> pick_a(1, 3);
        std::uniform_int_distribution<std::size_t> pick_n(0, 30);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);

        const std::size_t S = pick_s(rng);
        const std::size_t A = pick_a(rng);
        FiniteEnv env("random", random_mdp(S, A, rng));
        const double lambda = 0.2 + 1.8 * unit(rng);
        const double beta = 5.0 * (1.0 - unit(rng));  // (0, 5]

        FiniteEmbeddingModel fem(env.mdp(), lambda);
        CmeModel model(KernelSpec::delta(), lambda);
        const std::size_t n = pick_n(rng);
        std::uniform_int_distribution<std::size_t> any_s(0, S - 1);
        std::uniform_int_distribution<std::size_t> any_a(0, A - 1);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t s = any_s(rng);
            const std::size_t a = any_a(rng);
            Transition tr;
            tr.state = env.state_point(s);
            tr.action = a;
            tr.action_point = env.actions()[a];
            tr.next_state = env.state_point(env.sample_next(s, a, rng));
            tr.reward = env.mdp().rewards(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
            tr.episode = 1;
            tr.step = k + 1;
            fem.add(tr);
            model.append(tr);
        }

        Eigen::VectorXd f(static_cast<Eigen::Index>(S));
        for (Eigen::Index k = 0; k < f.size(); ++k) f(k) = 2.0 * normal(rng);
        const std::size_t qs = any_s(rng);
        const std::size_t qa = any_a(rng);

        // Kernel side: alpha-weighted targets plus the closed-form bonus.
        const Point input = join(env.state_point(qs), env.actions()[qa]);
        Eigen::VectorXd targets(static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < n; ++k) {
            targets(static_cast<Eigen::Index>(k)) = f(static_cast<Eigen::Index>(env.state_index(model.buffer()[k].next_state)));
        }
        const double kernel_value = model.mean_embedding_prediction(input, targets) +
                                    beta / std::sqrt(lambda) * f.norm() *
                                        std::sqrt(model.predictive_variance(input));

        double gap = 0.0;
        bool ok = true;
        try {
            AscentOptions ascent;
            ascent.seed = derive_seed(options.seed, "ascent", i);
            const OptimisticValue ov = brute_force_optimistic_value(fem, beta, qs, qa, f, ascent);
            gap = std::max(ov.gap, std::abs(kernel_value - ov.analytic));
        } catch (const Error& e) {
            ok = false;
            if (first_failure.str().empty()) first_failure << "instance " << i << ": " << e.what();
        }
        if (ok && gap > options.tolerance) {
            ok = false;
            if (first_failure.str().empty()) first_failure << "instance " << i << ": gap " << gap;
        }
        report.worst = std::max(report.worst, gap);
        if (ok) ++report.passed;
    }
    std::ostringstream msg;
    msg << report.passed << "/" << report.total << " instances agree <= " << options.tolerance
        << " (worst gap " << report.worst << ")";
    if (!first_failure.str().empty()) msg << "; first failure: " << first_failure.str();
    report.message = msg.str();
    return report;
}

ConcentrationReport verify_concentration(const ConcentrationOptions& options) {
    ExperimentConfig cfg;
    cfg.env = options.env;
    cfg.episodes = options.episodes;
    cfg.lambda = options.lambda;
    cfg.delta = options.delta;
    cfg.master_seed = options.master_seed;
    cfg.parallel = options.parallel;
    cfg.checks = CheckSet{true, true, true, false};
    cfg.seeds.clear();
    for (std::size_t r = 0; r < options.runs; ++r) cfg.seeds.push_back(r);

    ConcentrationReport report;
    for (const auto& run : run_experiment(cfg)) {
        ++report.runs;
        bool covered = true;
        for (const auto& e : run.episodes) {
            if (e.concentration != CheckStatus::Pass) covered = false;
            if (e.optimism != CheckStatus::Skip) ++report.checked_episodes;
            if (e.optimism == CheckStatus::Fail) ++report.optimism_violations;
            if (e.varsum == CheckStatus::Fail) ++report.varsum_failures;
        }
        if (covered) ++report.covered_runs;
        if (!run.bound_ok) ++report.bound_failures;
    }
    return report;
}

InvariantReport verify_invariants(std::size_t episodes, std::size_t seeds, std::uint64_t master_seed) {
    InvariantReport report;
    auto suite = [&](const std::string& env, BonusMode mode, double zeta) {
        ExperimentConfig cfg;
        cfg.env = env;
        cfg.episodes = episodes;
        cfg.master_seed = master_seed;
        cfg.mode = mode;
        cfg.perturbation = zeta;
        cfg.checks = CheckSet{true, true, true, false};
        cfg.seeds.clear();
        for (std::size_t s = 0; s < seeds; ++s) cfg.seeds.push_back(s);
        std::size_t certified = 0;
        std::size_t violations = 0;
        std::size_t varsum_fail = 0;
        std::size_t bound_fail = 0;
        for (const auto& run : run_experiment(cfg)) {
            for (const auto& e : run.episodes) {
                if (e.optimism != CheckStatus::Skip) ++certified;
                if (e.optimism == CheckStatus::Fail) ++violations;
                if (e.varsum == CheckStatus::Fail) ++varsum_fail;
            }
            if (!run.bound_ok) ++bound_fail;
        }
        std::ostringstream line;
        line << (mode == BonusMode::Misspecified ? "approximate optimism" : "optimism") << " on " << env;
        if (zeta > 0.0) line << " (zeta " << zeta << ")";
        line << ": " << violations << " violations in " << certified
             << " certified episodes; variance-sum failures " << varsum_fail
             << "; regret-ceiling failures " << bound_fail;
        report.lines.push_back(line.str());
        report.failures += violations + varsum_fail + bound_fail;
    };
    for (const char* env : {"chain2", "riverswim6", "gridworld4x4"}) suite(env, BonusMode::WellSpecified, 0.0);
    for (const char* env : {"chain2", "riverswim6"}) suite(env, BonusMode::Misspecified, 0.05);
    return report;
}

}  // namespace cmerl
