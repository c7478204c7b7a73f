#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cmerl/cme_model.hpp"
#include "cmerl/env.hpp"

namespace cmerl {

/// Deterministic policy indexed [h - 1][s].
using Policy = std::vector<std::vector<std::size_t>>;

/// Stochastic policy: one S x A row-stochastic matrix per step.
using StochasticPolicy = std::vector<Eigen::MatrixXd>;

struct DpSolution {
    std::vector<Eigen::MatrixXd> q;  // [h - 1], S x A, h = 1..H
    std::vector<Eigen::VectorXd> v;  // [h - 1], length S, h = 1..H+1
    Policy policy;                   // greedy, lowest index on ties

    [[nodiscard]] double q_at(std::size_t h, std::size_t s, std::size_t a) const;
    [[nodiscard]] double v_at(std::size_t h, std::size_t s) const;
};

/// Exact backward induction.
DpSolution solve_dp(const FiniteMdp& mdp);

/// Values V^pi_h for h = 1..H+1 (index h - 1).
std::vector<Eigen::VectorXd> evaluate_policy(const FiniteMdp& mdp, const Policy& policy);
std::vector<Eigen::VectorXd> evaluate_policy(const FiniteMdp& mdp, const StochasticPolicy& policy);

StochasticPolicy uniform_policy(const FiniteMdp& mdp);

/// Largest |Q_h - R - P V_{h+1}| and |V_h - max_a Q_h| over the table.
double bellman_residual(const FiniteMdp& mdp, const DpSolution& dp);

/// V*_1(s_init) - V^pi_1(s_init).
double regret_term(const FiniteMdp& mdp, const DpSolution& dp, const Policy& policy);

/// Explicit finite-dimensional counterpart of the kernel estimator on a
/// tabular MDP: phi(s, a) = sqrt(c) e_{(s,a)} for a Delta kernel of output
/// scale c, psi(s') = e_{s'}.
class FiniteEmbeddingModel {
public:
    FiniteEmbeddingModel(const FiniteMdp& mdp, double lambda, double output_scale = 1.0);

    void add(std::size_t s, std::size_t a, std::size_t next);
    /// Adds a transition given in one-hot encoding.
    void add(const Transition& tr);

    [[nodiscard]] std::size_t num_states() const { return states_; }
    [[nodiscard]] std::size_t num_actions() const { return actions_; }
    [[nodiscard]] std::size_t column(std::size_t s, std::size_t a) const { return s * actions_ + a; }
    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] std::size_t size() const { return n_; }

    [[nodiscard]] Eigen::VectorXd feature(std::size_t s, std::size_t a) const;
    [[nodiscard]] const Eigen::MatrixXd& theta_p() const { return theta_p_; }
    /// M_t = sum phi phi^T + lambda I.
    [[nodiscard]] const Eigen::MatrixXd& m() const { return m_; }
    /// B M_t^{-1} with B = sum psi(s') phi^T.
    [[nodiscard]] Eigen::MatrixXd theta_hat() const;

    /// <f, Theta_hat phi(s, a)>.
    [[nodiscard]] double mean_prediction(std::size_t s, std::size_t a, const Eigen::VectorXd& f) const;
    /// lambda phi^T M^{-1} phi.
    [[nodiscard]] double variance(std::size_t s, std::size_t a) const;
    /// || (Theta_P - Theta_hat) phi(s, a) ||.
    [[nodiscard]] double embedding_error(std::size_t s, std::size_t a) const;

private:
    std::size_t states_;
    std::size_t actions_;
    double lambda_;
    double scale_;
    std::size_t n_ = 0;
    Eigen::MatrixXd theta_p_;
    Eigen::MatrixXd m_;
    Eigen::MatrixXd b_;
};

struct ConcentrationResult {
    double lhs = 0.0;
    bool holds = false;
};

/// ||(Theta_P - Theta_hat) M^{1/2}|| (spectral) against beta.
ConcentrationResult concentration_check(const FiniteEmbeddingModel& fem, double beta);

struct OptimisticValue {
    double analytic = 0.0;
    double ascent = 0.0;
    double value = 0.0;  // the larger of the two
    double gap = 0.0;    // |analytic - ascent|
};

struct AscentOptions {
    double step = 0.1;
    std::size_t iterations = 2000;
    std::size_t restarts = 10;
    std::uint64_t seed = 0;
};

/// max <f, Theta phi(s, a)> over ||(Theta - Theta_hat) M^{1/2}||_HS <= beta,
/// both from the KKT maximiser and by projected gradient ascent.  Throws
/// if the two disagree by more than 1e-5.
OptimisticValue brute_force_optimistic_value(const FiniteEmbeddingModel& fem, double beta,
                                             std::size_t s, std::size_t a,
                                             const Eigen::VectorXd& f,
                                             const AscentOptions& options = {});

/// Theorem-style regret ceiling after N steps with information gain gamma:
/// 2 c alpha sqrt(2 (1 + B_phi^2 H / lambda) N gamma) + 4 zeta N + 2 H sqrt(2 N log(2 / delta))
/// with c = B_V (+ zeta ||1|| when misspecified).
double regret_bound(const ConfidenceConfig& cfg, std::size_t horizon, std::size_t steps,
                    double info_gain, bool misspecified);

}  // namespace cmerl
