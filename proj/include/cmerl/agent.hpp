#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cmerl/cme_model.hpp"
#include "cmerl/env.hpp"

namespace cmerl {

enum class BonusMode { WellSpecified, Misspecified };

/// Known reward function R(s, a) with a in the agent's action index set.
using RewardFn = std::function<double(const Point& state, std::size_t action)>;

/// Offset added to a value target at a given next state (used to inject a
/// known misspecification of magnitude zeta).
using TargetPerturbation = std::function<double(const Point& next_state)>;

struct AgentConfig {
    std::size_t horizon = 1;
    BonusMode mode = BonusMode::WellSpecified;
    ConfidenceConfig confidence;
    std::vector<Point> actions;
    /// Multiply the misspecified bonus by lambda^{-1/2} as in the well-specified one.
    bool include_lambda_root = true;
    /// Ablation multiplier on beta; 1 reproduces the theoretical width.
    double beta_scale = 1.0;
    TargetPerturbation target_perturbation;

    void validate() const;
};

/// Coefficient c such that the bonus is c * beta * sigma:
/// (B_V [+ zeta ||1||]) [* lambda^{-1/2}].
double bonus_coefficient(const AgentConfig& agent);

/// beta_scale * beta_t(delta / 2) for the episode-start model.
double episode_beta(const EmbeddingModel& model, const AgentConfig& agent, std::size_t t);

/// Value targets v_h (h = 1..H+1) at the buffered next states, in buffer order.
class EpisodeValueTable {
public:
    EpisodeValueTable() = default;
    EpisodeValueTable(std::size_t horizon, std::size_t n);

    [[nodiscard]] std::size_t horizon() const { return horizon_; }
    [[nodiscard]] std::size_t size() const { return n_; }
    [[nodiscard]] bool has(std::size_t h) const { return h >= 1 && h <= horizon_ + 1; }
    [[nodiscard]] const Eigen::VectorXd& at(std::size_t h) const;
    [[nodiscard]] Eigen::VectorXd& at(std::size_t h);

private:
    std::size_t horizon_ = 0;
    std::size_t n_ = 0;
    std::vector<Eigen::VectorXd> values_;
};

struct StepTrace {
    std::size_t action = 0;
    double reward = 0.0;
    Point state;
    Point next_state;
    double q = 0.0;
    double bonus = 0.0;
    double variance = 0.0;  // sigma^2 at the chosen (s, a) against the episode-start model
};

using PolicyTrace = std::vector<StepTrace>;

/// Optimistic Q-value R + alpha^T v_{h+1} + bonus, computed from scratch
/// against the episode-start model.
double q_value(const EmbeddingModel& model, const AgentConfig& agent,
               const EpisodeValueTable& values, std::size_t h, const Point& state,
               std::size_t action, const RewardFn& reward, double beta);

/// Backward optimistic pass h = H..1 over every buffered next state.
EpisodeValueTable backward_value_pass(const EmbeddingModel& model, const AgentConfig& agent,
                                      const RewardFn& reward, double beta);

/// argmax_a Q_h(s, a) with ties broken towards the lowest action index.
std::pair<std::size_t, double> select_action(const EmbeddingModel& model,
                                             const AgentConfig& agent,
                                             const EpisodeValueTable& values, std::size_t h,
                                             const Point& state, const RewardFn& reward,
                                             double beta);

/// The episodic optimistic agent.
///
/// Owns the embedding model and a cache of factored (state, action) queries
/// that is extended incrementally as the buffer grows, so one episode costs
/// O(H n^2 |A|) after the first visit to each distinct state.  Transitions
/// observed during an episode are absorbed only once the episode ends.
class CmeRlAgent {
public:
    CmeRlAgent(AgentConfig config, std::unique_ptr<EmbeddingModel> model);

    /// Freezes the model for episode t and runs the backward pass.
    void begin_episode(std::size_t t, RewardFn reward);

    [[nodiscard]] double q_value(std::size_t h, const Point& state, std::size_t action) const;
    [[nodiscard]] std::pair<std::size_t, double> select_action(std::size_t h,
                                                               const Point& state) const;
    [[nodiscard]] double bonus(const Point& state, std::size_t action) const;
    [[nodiscard]] double variance(const Point& state, std::size_t action) const;

    /// Adds `state` to the query cache so later episodes reuse its factors.
    void track_state(const Point& state);

    /// Appends the episode's transitions to the model.
    void absorb(const std::vector<Transition>& transitions);

    /// begin_episode, H greedy steps against `env`, then absorb.
    PolicyTrace run_episode(const Environment& env, Rng& rng, std::size_t t);

    /// The acting half of run_episode, for callers that inspect the
    /// optimistic values between begin_episode and the rollout.
    PolicyTrace play_episode(const Environment& env, Rng& rng);

    [[nodiscard]] const EmbeddingModel& model() const { return *model_; }
    [[nodiscard]] const AgentConfig& config() const { return config_; }
    [[nodiscard]] const EpisodeValueTable& values() const { return values_; }
    [[nodiscard]] double beta() const { return beta_; }
    [[nodiscard]] std::size_t episode() const { return episode_; }

private:
    struct PointLess {
        bool operator()(const Point& a, const Point& b) const;
    };

    std::size_t intern(const Point& state);
    [[nodiscard]] const std::vector<QueryFactor>* cached(const Point& state) const;
    [[nodiscard]] double q_from_factor(std::size_t h, const Point& state, std::size_t action,
                                       const QueryFactor& f) const;

    AgentConfig config_;
    std::unique_ptr<EmbeddingModel> model_;
    RewardFn reward_;
    std::size_t episode_ = 0;
    double beta_ = 0.0;
    double coefficient_ = 0.0;
    EpisodeValueTable values_;
    // projections_[h] maps v_{h+1} (plus any perturbation) to mean weights.
    std::vector<Eigen::VectorXd> projections_;

    std::map<Point, std::size_t, PointLess> index_;
    std::vector<Point> states_;
    std::vector<std::vector<QueryFactor>> factors_;  // [distinct state][action]
    std::vector<std::size_t> next_index_;            // buffer position -> distinct state
};

}  // namespace cmerl
