#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cmerl/kernel.hpp"

namespace cmerl {

using Rng = std::mt19937_64;

/// Stable 64-bit seed for an (master seed, environment, run) triple.
std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& env_name,
                          std::uint64_t run_index);

/// Tabular episodic MDP with known rewards in [0, 1].
struct FiniteMdp {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::size_t horizon = 1;
    std::size_t initial_state = 0;
    std::vector<double> transitions;  // [s][a][s'] row-major
    Eigen::MatrixXd rewards;          // S x A

    FiniteMdp() = default;
    FiniteMdp(std::size_t s, std::size_t a, std::size_t h, std::size_t s_init);

    [[nodiscard]] double& p(std::size_t s, std::size_t a, std::size_t next) {
        return transitions[(s * num_actions + a) * num_states + next];
    }
    [[nodiscard]] double p(std::size_t s, std::size_t a, std::size_t next) const {
        return transitions[(s * num_actions + a) * num_states + next];
    }
    /// Row P(. | s, a) as a vector of length S.
    [[nodiscard]] Eigen::VectorXd row(std::size_t s, std::size_t a) const;

    /// Throws unless rows are probability vectors (1e-12) and rewards lie in [0, 1].
    void validate() const;

    /// sqrt(sum_{s,a,s'} P(s'|s,a)^2): the HS norm of the embedding operator
    /// under one-hot features.
    [[nodiscard]] double embedding_hs_norm() const;
};

FiniteMdp finite_mdp_from_json(const std::string& text);
FiniteMdp load_finite_mdp(const std::string& path);
std::string finite_mdp_to_json(const FiniteMdp& mdp);

struct StepResult {
    double reward = 0.0;
    Point next_state;
};

/// Episodic environment interface: fixed horizon, fixed initial state,
/// known reward function, stochastic transitions driven by a caller-owned RNG.
class Environment {
public:
    virtual ~Environment() = default;

    [[nodiscard]] virtual std::unique_ptr<Environment> clone() const = 0;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual std::string description() const = 0;
    [[nodiscard]] virtual std::size_t horizon() const = 0;
    [[nodiscard]] virtual std::size_t state_dimension() const = 0;
    [[nodiscard]] virtual const std::vector<Point>& actions() const = 0;

    /// Initial state of episode t; never consumes randomness.
    [[nodiscard]] virtual Point reset(std::size_t episode) const = 0;

    [[nodiscard]] virtual double reward(const Point& state, std::size_t action) const = 0;

    [[nodiscard]] virtual StepResult step(const Point& state, std::size_t action, Rng& rng) const = 0;

    /// Underlying tabular model, or nullptr for continuous environments.
    [[nodiscard]] virtual const FiniteMdp* finite() const { return nullptr; }

    /// Representative state-action inputs (landmark candidates for sketches).
    [[nodiscard]] virtual std::vector<Point> sample_inputs(std::size_t count, Rng& rng) const = 0;

    [[nodiscard]] std::size_t num_actions() const { return actions().size(); }
};

/// Environment over a FiniteMdp with one-hot state and action encodings.
class FiniteEnv final : public Environment {
public:
    FiniteEnv(std::string name, FiniteMdp mdp, std::string description = {});

    [[nodiscard]] std::unique_ptr<Environment> clone() const override;
    [[nodiscard]] std::string name() const override { return name_; }
    [[nodiscard]] std::string description() const override { return description_; }
    [[nodiscard]] std::size_t horizon() const override { return mdp_.horizon; }
    [[nodiscard]] std::size_t state_dimension() const override { return mdp_.num_states; }
    [[nodiscard]] const std::vector<Point>& actions() const override { return actions_; }
    [[nodiscard]] Point reset(std::size_t episode) const override;
    [[nodiscard]] double reward(const Point& state, std::size_t action) const override;
    [[nodiscard]] StepResult step(const Point& state, std::size_t action, Rng& rng) const override;
    [[nodiscard]] const FiniteMdp* finite() const override { return &mdp_; }
    [[nodiscard]] std::vector<Point> sample_inputs(std::size_t count, Rng& rng) const override;

    [[nodiscard]] const FiniteMdp& mdp() const { return mdp_; }
    [[nodiscard]] Point state_point(std::size_t s) const;
    /// Index of a one-hot state point; throws on anything else.
    [[nodiscard]] std::size_t state_index(const Point& state) const;

    /// Samples s' ~ P(. | s, a) by inverse CDF on one uniform draw.
    [[nodiscard]] std::size_t sample_next(std::size_t s, std::size_t a, Rng& rng) const;

private:
    std::string name_;
    std::string description_;
    FiniteMdp mdp_;
    std::vector<Point> actions_;
};

/// s' = clip(W [tanh(s); e_a] + N(0, sigma^2 I), box) with e_a the action's
/// displacement; reward exp(-|s - goal|^2).
class NonlinearGaussianEnv final : public Environment {
public:
    struct Params {
        std::size_t horizon = 4;
        double noise_std = 0.1;
        double box = 2.0;  // states clipped to [-box, box]^m
        Eigen::MatrixXd weights;            // m x 2m
        std::vector<Point> action_effects;  // displacement fed to the dynamics
        std::vector<Point> actions;         // one-hot kernel encodings, filled by the constructor
        Point initial_state;
        Point goal;
    };

    NonlinearGaussianEnv(std::string name, Params params);

    [[nodiscard]] std::unique_ptr<Environment> clone() const override;
    [[nodiscard]] std::string name() const override { return name_; }
    [[nodiscard]] std::string description() const override;
    [[nodiscard]] std::size_t horizon() const override { return params_.horizon; }
    [[nodiscard]] std::size_t state_dimension() const override {
        return static_cast<std::size_t>(params_.initial_state.size());
    }
    [[nodiscard]] const std::vector<Point>& actions() const override { return params_.actions; }
    [[nodiscard]] Point reset(std::size_t episode) const override;
    [[nodiscard]] double reward(const Point& state, std::size_t action) const override;
    [[nodiscard]] StepResult step(const Point& state, std::size_t action, Rng& rng) const override;
    [[nodiscard]] std::vector<Point> sample_inputs(std::size_t count, Rng& rng) const override;

    /// Noise-free successor clip(W [tanh(s); e_a]).
    [[nodiscard]] Point mean_next_state(const Point& state, std::size_t action) const;
    [[nodiscard]] const Params& params() const { return params_; }

private:
    [[nodiscard]] Point clip(Point s) const;

    std::string name_;
    Params params_;
};

/// Names of the built-in environments.
std::vector<std::string> standard_env_names();

/// Builds a catalog environment by name; unknown names raise an error that
/// lists the catalog.
std::unique_ptr<Environment> make_standard_env(const std::string& name);

/// Catalog environment, or a FiniteMdp JSON file when `name_or_path` ends in ".json".
std::unique_ptr<Environment> resolve_env(const std::string& name_or_path);

FiniteMdp make_chain2();
FiniteMdp make_riverswim6();
FiniteMdp make_gridworld4x4();

}  // namespace cmerl
