#include "cmerl/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace cmerl {

namespace {

using Index = Eigen::Index;

Index ix(std::size_t i) { return static_cast<Index>(i); }

// E_{X ~ P(.|s,a)}[v(X)]
double expectation(const FiniteMdp& mdp, std::size_t s, std::size_t a, const Eigen::VectorXd& v) {
    double out = 0.0;
    for (std::size_t next = 0; next < mdp.num_states; ++next) out += mdp.p(s, a, next) * v(ix(next));
    return out;
}

}  // namespace

double DpSolution::q_at(std::size_t h, std::size_t s, std::size_t a) const {
    if (h < 1 || h > q.size()) throw Error("dp solution: step out of range");
    return q[h - 1](ix(s), ix(a));
}

double DpSolution::v_at(std::size_t h, std::size_t s) const {
    if (h < 1 || h > v.size()) throw Error("dp solution: step out of range");
    return v[h - 1](ix(s));
}

DpSolution solve_dp(const FiniteMdp& mdp) {
    mdp.validate();
    const std::size_t H = mdp.horizon;
    const std::size_t S = mdp.num_states;
    const std::size_t A = mdp.num_actions;
    DpSolution dp;
    dp.q.assign(H, Eigen::MatrixXd::Zero(ix(S), ix(A)));
    dp.v.assign(H + 1, Eigen::VectorXd::Zero(ix(S)));
    dp.policy.assign(H, std::vector<std::size_t>(S, 0));
    for (std::size_t h = H; h > 0; --h) {
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t a = 0; a < A; ++a) {
                const double q = mdp.rewards(ix(s), ix(a)) + expectation(mdp, s, a, dp.v[h]);
                dp.q[h - 1](ix(s), ix(a)) = q;
                if (a == 0 || q > dp.v[h - 1](ix(s))) {
                    dp.v[h - 1](ix(s)) = q;
                    dp.policy[h - 1][s] = a;
                }
            }
        }
    }
    return dp;
}

std::vector<Eigen::VectorXd> evaluate_policy(const FiniteMdp& mdp, const Policy& policy) {
    const std::size_t H = mdp.horizon;
    const std::size_t S = mdp.num_states;
    if (policy.size() != H) throw Error("evaluate_policy: policy needs one row per step");
    std::vector<Eigen::VectorXd> v(H + 1, Eigen::VectorXd::Zero(ix(S)));
    for (std::size_t h = H; h > 0; --h) {
        if (policy[h - 1].size() != S) throw Error("evaluate_policy: policy row needs S entries");
        for (std::size_t s = 0; s < S; ++s) {
            const std::size_t a = policy[h - 1][s];
            if (a >= mdp.num_actions) throw Error("evaluate_policy: action index out of range");
            v[h - 1](ix(s)) = mdp.rewards(ix(s), ix(a)) + expectation(mdp, s, a, v[h]);
        }
    }
    return v;
}

std::vector<Eigen::VectorXd> evaluate_policy(const FiniteMdp& mdp, const StochasticPolicy& policy) {
    const std::size_t H = mdp.horizon;
    const std::size_t S = mdp.num_states;
    const std::size_t A = mdp.num_actions;
    if (policy.size() != H) throw Error("evaluate_policy: policy needs one matrix per step");
    std::vector<Eigen::VectorXd> v(H + 1, Eigen::VectorXd::Zero(ix(S)));
    for (std::size_t h = H; h > 0; --h) {
        const auto& pi = policy[h - 1];
        if (pi.rows() != ix(S) || pi.cols() != ix(A)) throw Error("evaluate_policy: policy must be S x A");
        for (std::size_t s = 0; s < S; ++s) {
            double total = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                const double w = pi(ix(s), ix(a));
                if (w == 0.0) continue;
                total += w * (mdp.rewards(ix(s), ix(a)) + expectation(mdp, s, a, v[h]));
            }
            v[h - 1](ix(s)) = total;
        }
    }
    return v;
}

StochasticPolicy uniform_policy(const FiniteMdp& mdp) {
    const double w = 1.0 / static_cast<double>(mdp.num_actions);
    return StochasticPolicy(mdp.horizon, Eigen::MatrixXd::Constant(ix(mdp.num_states), ix(mdp.num_actions), w));
}

double bellman_residual(const FiniteMdp& mdp, const DpSolution& dp) {
    double worst = dp.v.back().cwiseAbs().maxCoeff();
    for (std::size_t h = 1; h <= mdp.horizon; ++h) {
        for (std::size_t s = 0; s < mdp.num_states; ++s) {
            for (std::size_t a = 0; a < mdp.num_actions; ++a) {
                const double target = mdp.rewards(ix(s), ix(a)) + expectation(mdp, s, a, dp.v[h]);
                worst = std::max(worst, std::abs(dp.q[h - 1](ix(s), ix(a)) - target));
            }
            worst = std::max(worst, std::abs(dp.v[h - 1](ix(s)) - dp.q[h - 1].row(ix(s)).maxCoeff()));
        }
    }
    return worst;
}

double regret_term(const FiniteMdp& mdp, const DpSolution& dp, const Policy& policy) {
    const auto v = evaluate_policy(mdp, policy);
    return dp.v[0](ix(mdp.initial_state)) - v[0](ix(mdp.initial_state));
}

FiniteEmbeddingModel::FiniteEmbeddingModel(const FiniteMdp& mdp, double lambda, double output_scale)
    : states_(mdp.num_states), actions_(mdp.num_actions), lambda_(lambda), scale_(output_scale) {
    if (!(lambda > 0.0)) throw Error("finite embedding model: lambda must be positive");
    if (!(output_scale > 0.0)) throw Error("finite embedding model: output scale must be positive");
    mdp.validate();
    const Index d = ix(states_ * actions_);
    theta_p_ = Eigen::MatrixXd::Zero(ix(states_), d);
    // Theta_P phi(s, a) = P(.|s, a), and phi carries a factor sqrt(c).
    for (std::size_t s = 0; s < states_; ++s) {
        for (std::size_t a = 0; a < actions_; ++a) {
            theta_p_.col(ix(column(s, a))) = mdp.row(s, a) / std::sqrt(scale_);
        }
    }
    m_ = lambda_ * Eigen::MatrixXd::Identity(d, d);
    b_ = Eigen::MatrixXd::Zero(ix(states_), d);
}

Eigen::VectorXd FiniteEmbeddingModel::feature(std::size_t s, std::size_t a) const {
    if (s >= states_ || a >= actions_) throw Error("finite embedding model: index out of range");
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(ix(states_ * actions_));
    phi(ix(column(s, a))) = std::sqrt(scale_);
    return phi;
}

void FiniteEmbeddingModel::add(std::size_t s, std::size_t a, std::size_t next) {
    if (next >= states_) throw Error("finite embedding model: next state out of range");
    const Eigen::VectorXd phi = feature(s, a);
    m_ += phi * phi.transpose();
    b_.row(ix(next)) += phi.transpose();
    ++n_;
}

void FiniteEmbeddingModel::add(const Transition& tr) {
    auto decode = [](const Point& p, std::size_t n, const char* what) {
        if (static_cast<std::size_t>(p.size()) != n || (p.array() == 1.0).count() != 1 ||
            (p.array() == 0.0).count() != p.size() - 1) {
            throw Error(std::string("finite embedding model: ") + what + " is not one-hot");
        }
        Index i = 0;
        p.maxCoeff(&i);
        return static_cast<std::size_t>(i);
    };
    add(decode(tr.state, states_, "state"), decode(tr.action_point, actions_, "action"),
        decode(tr.next_state, states_, "next state"));
}

Eigen::MatrixXd FiniteEmbeddingModel::theta_hat() const {
    // Theta_hat = B M^{-1}; M is symmetric, so solve M X = B^T.
    return m_.llt().solve(b_.transpose()).transpose();
}

double FiniteEmbeddingModel::mean_prediction(std::size_t s, std::size_t a, const Eigen::VectorXd& f) const {
    if (f.size() != ix(states_)) throw Error("finite embedding model: f needs S entries");
    return f.dot(theta_hat() * feature(s, a));
}

double FiniteEmbeddingModel::variance(std::size_t s, std::size_t a) const {
    const Eigen::VectorXd phi = feature(s, a);
    return lambda_ * phi.dot(m_.llt().solve(phi));
}

double FiniteEmbeddingModel::embedding_error(std::size_t s, std::size_t a) const {
    return ((theta_p_ - theta_hat()) * feature(s, a)).norm();
}

namespace {

// Symmetric square root and inverse square root of an SPD matrix.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> spd_roots(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
        throw Error("finite embedding model: M is not positive definite");
    }
    const Eigen::VectorXd root = eig.eigenvalues().cwiseSqrt();
    const Eigen::MatrixXd& u = eig.eigenvectors();
    return {u * root.asDiagonal() * u.transpose(), u * root.cwiseInverse().asDiagonal() * u.transpose()};
}

}  // namespace

ConcentrationResult concentration_check(const FiniteEmbeddingModel& fem, double beta) {
    const auto [root, inv_root] = spd_roots(fem.m());
    (void)inv_root;
    const Eigen::MatrixXd e = (fem.theta_p() - fem.theta_hat()) * root;
    // Spectral norm from the eigenvalues of the S x S Gram matrix E E^T.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(e * e.transpose(), Eigen::EigenvaluesOnly);
    ConcentrationResult out;
    out.lhs = std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
    out.holds = out.lhs <= beta;
    return out;
}

OptimisticValue brute_force_optimistic_value(const FiniteEmbeddingModel& fem, double beta,
                                             std::size_t s, std::size_t a,
                                             const Eigen::VectorXd& f,
                                             const AscentOptions& options) {
    if (!(beta >= 0.0)) throw Error("optimistic value: beta must be nonnegative");
    if (f.size() != ix(fem.num_states())) throw Error("optimistic value: f needs S entries");
    const Eigen::VectorXd phi = fem.feature(s, a);
    const Eigen::MatrixXd theta_hat = fem.theta_hat();
    const double center = f.dot(theta_hat * phi);

    OptimisticValue out;
    // KKT maximiser: Theta* = Theta_hat + beta / (|phi|_{M^-1} |f|) (f x phi) M^{-1}.
    const Eigen::VectorXd m_inv_phi = fem.m().llt().solve(phi);
    const double phi_norm = std::sqrt(phi.dot(m_inv_phi));
    const double f_norm = f.norm();
    if (f_norm > 0.0 && phi_norm > 0.0 && beta > 0.0) {
        const Eigen::MatrixXd theta_star =
            theta_hat + (beta / (phi_norm * f_norm)) * f * m_inv_phi.transpose();
        out.analytic = f.dot(theta_star * phi);
    } else {
        out.analytic = center;
    }

    // Ascent in W = (Theta - Theta_hat) M^{1/2}: the objective is
    // center + <W, f g^T> with g = M^{-1/2} phi, over the HS ball of radius beta.
    const auto [root, inv_root] = spd_roots(fem.m());
    (void)root;
    const Eigen::MatrixXd grad = f * (inv_root * phi).transpose();
    const double grad_norm = grad.norm();
    out.ascent = center;
    if (grad_norm > 0.0 && beta > 0.0) {
        Rng rng(options.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        auto project = [beta](Eigen::MatrixXd& w) {
            const double n = w.norm();
            if (n > beta) w *= beta / n;
        };
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < std::max<std::size_t>(options.restarts, 1); ++r) {
            Eigen::MatrixXd w(grad.rows(), grad.cols());
            for (Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
            w *= beta * uniform(rng) / std::max(w.norm(), 1e-300);
            for (std::size_t it = 0; it < options.iterations; ++it) {
                w += (options.step / grad_norm) * grad;
                project(w);
            }
            best = std::max(best, center + (w.array() * grad.array()).sum());
        }
        out.ascent = best;
    }
    out.value = std::max(out.analytic, out.ascent);
    out.gap = std::abs(out.analytic - out.ascent);
    if (out.gap > 1e-5) {
        std::ostringstream msg;
        msg << "optimistic value: closed form " << out.analytic << " and gradient ascent "
            << out.ascent << " disagree by " << out.gap;
        throw Error(msg.str());
    }
    return out;
}

double regret_bound(const ConfidenceConfig& cfg, std::size_t horizon, std::size_t steps,
                    double info_gain, bool misspecified) {
    if (steps == 0) return 0.0;
    const double n = static_cast<double>(steps);
    const double h = static_cast<double>(horizon);
    const double lam = cfg.lambda;
    const double alpha = std::sqrt(2.0 * lam * cfg.b_p * cfg.b_p +
                                   256.0 * (1.0 + 1.0 / lam) * info_gain *
                                       std::log(4.0 * n * n / cfg.delta));
    const double coef = misspecified ? cfg.b_v + cfg.zeta * cfg.one_norm : cfg.b_v;
    double bound = 2.0 * coef * alpha *
                       std::sqrt(2.0 * (1.0 + cfg.b_phi * cfg.b_phi * h / lam) * n * info_gain) +
                   2.0 * h * std::sqrt(2.0 * n * std::log(2.0 / cfg.delta));
    if (misspecified) bound += 4.0 * cfg.zeta * n;
    return bound;
}

}  // namespace cmerl
