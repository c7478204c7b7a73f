#include "cmerl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cmerl {

void AgentConfig::validate() const {
    if (horizon < 1) throw Error("agent: horizon must be >= 1");
    if (actions.empty()) throw Error("agent: action set must be nonempty");
    if (!(beta_scale >= 0.0) || !std::isfinite(beta_scale)) {
        throw Error("agent: beta_scale must be a finite nonnegative number");
    }
    confidence.validate();
}

double bonus_coefficient(const AgentConfig& agent) {
    const auto& c = agent.confidence;
    double coef = c.b_v;
    bool root = true;
    if (agent.mode == BonusMode::Misspecified) {
        coef += c.zeta * c.one_norm;
        root = agent.include_lambda_root;
    }
    if (root) coef /= std::sqrt(c.lambda);
    return coef;
}

double episode_beta(const EmbeddingModel& model, const AgentConfig& agent, std::size_t t) {
    return agent.beta_scale *
           beta(model, agent.confidence, t, agent.horizon, agent.confidence.delta / 2.0);
}

EpisodeValueTable::EpisodeValueTable(std::size_t horizon, std::size_t n)
    : horizon_(horizon), n_(n), values_(horizon + 1, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

const Eigen::VectorXd& EpisodeValueTable::at(std::size_t h) const {
    if (!has(h)) throw Error("value table: no entry for step " + std::to_string(h));
    return values_[h - 1];
}

Eigen::VectorXd& EpisodeValueTable::at(std::size_t h) {
    if (!has(h)) throw Error("value table: no entry for step " + std::to_string(h));
    return values_[h - 1];
}

namespace {

// Targets fed to the regression at step h: v_{h+1}, plus the injected
// offset at every buffered next state unless h + 1 is terminal.
Eigen::VectorXd value_targets(const EmbeddingModel& model, const AgentConfig& agent,
                              const EpisodeValueTable& values, std::size_t h) {
    Eigen::VectorXd v = values.at(h + 1);
    if (agent.target_perturbation && h + 1 <= agent.horizon) {
        const auto& buf = model.buffer();
        for (std::size_t i = 0; i < buf.size(); ++i) {
            v(static_cast<Eigen::Index>(i)) += agent.target_perturbation(buf[i].next_state);
        }
    }
    return v;
}

void check_table(const EmbeddingModel& model, const AgentConfig& agent,
                 const EpisodeValueTable& values, std::size_t h) {
    if (h < 1 || h > agent.horizon) throw Error("q_value: step out of range");
    if (!values.has(h + 1)) throw Error("q_value: value table is missing step " + std::to_string(h + 1));
    if (values.size() != model.size()) throw Error("q_value: value table does not match the model");
}

}  // namespace

double q_value(const EmbeddingModel& model, const AgentConfig& agent,
               const EpisodeValueTable& values, std::size_t h, const Point& state,
               std::size_t action, const RewardFn& reward, double beta) {
    check_table(model, agent, values, h);
    if (action >= agent.actions.size()) throw Error("q_value: action index out of range");
    const Point input = join(state, agent.actions[action]);
    const double mean = model.mean_embedding_prediction(input, value_targets(model, agent, values, h));
    const double sigma = std::sqrt(model.predictive_variance(input));
    return reward(state, action) + mean + bonus_coefficient(agent) * beta * sigma;
}

std::pair<std::size_t, double> select_action(const EmbeddingModel& model,
                                             const AgentConfig& agent,
                                             const EpisodeValueTable& values, std::size_t h,
                                             const Point& state, const RewardFn& reward,
                                             double beta) {
    std::size_t best = 0;
    double best_q = 0.0;
    for (std::size_t a = 0; a < agent.actions.size(); ++a) {
        const double q = q_value(model, agent, values, h, state, a, reward, beta);
        if (a == 0 || q > best_q) {
            best = a;
            best_q = q;
        }
    }
    return {best, best_q};
}

EpisodeValueTable backward_value_pass(const EmbeddingModel& model, const AgentConfig& agent,
                                      const RewardFn& reward, double beta) {
    agent.validate();
    const auto& buf = model.buffer();
    const std::size_t n = buf.size();
    const double horizon = static_cast<double>(agent.horizon);
    const double coef = bonus_coefficient(agent);
    EpisodeValueTable table(agent.horizon, n);
    if (n == 0) return table;

    // Factor every (next state, action) query once and reuse it for all h.
    std::vector<std::vector<QueryFactor>> factors(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& a : agent.actions) factors[i].push_back(model.factor_query(join(buf[i].next_state, a)));
    }
    for (std::size_t h = agent.horizon; h > 0; --h) {
        const Eigen::VectorXd w = model.value_projection(value_targets(model, agent, table, h));
        Eigen::VectorXd& out = table.at(h);
        for (std::size_t i = 0; i < n; ++i) {
            double best = 0.0;
            for (std::size_t a = 0; a < agent.actions.size(); ++a) {
                const auto& f = factors[i][a];
                const double q = reward(buf[i].next_state, a) + f.u.dot(w) +
                                 coef * beta * std::sqrt(f.variance);
                if (a == 0 || q > best) best = q;
            }
            out(static_cast<Eigen::Index>(i)) = std::min(horizon, best);
        }
    }
    return table;
}

bool CmeRlAgent::PointLess::operator()(const Point& a, const Point& b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i) != b(i)) return a(i) < b(i);
    }
    return false;
}

CmeRlAgent::CmeRlAgent(AgentConfig config, std::unique_ptr<EmbeddingModel> model)
    : config_(std::move(config)), model_(std::move(model)) {
    config_.validate();
    if (!model_) throw Error("agent: model must not be null");
    if (model_->lambda() != config_.confidence.lambda) {
        throw Error("agent: model and confidence config disagree on lambda");
    }
    coefficient_ = bonus_coefficient(config_);
}

std::size_t CmeRlAgent::intern(const Point& state) {
    auto it = index_.find(state);
    if (it != index_.end()) return it->second;
    const std::size_t id = states_.size();
    index_.emplace(state, id);
    states_.push_back(state);
    std::vector<QueryFactor> row;
    row.reserve(config_.actions.size());
    for (const auto& a : config_.actions) row.push_back(model_->factor_query(join(state, a)));
    factors_.push_back(std::move(row));
    return id;
}

void CmeRlAgent::track_state(const Point& state) { intern(state); }

const std::vector<QueryFactor>* CmeRlAgent::cached(const Point& state) const {
    auto it = index_.find(state);
    return it == index_.end() ? nullptr : &factors_[it->second];
}

void CmeRlAgent::begin_episode(std::size_t t, RewardFn reward) {
    if (t < 1) throw Error("agent: episodes are numbered from 1");
    if (!reward) throw Error("agent: reward function must be set");
    reward_ = std::move(reward);
    episode_ = t;

    for (auto& row : factors_) {
        for (auto& f : row) model_->refresh_query(f);
    }
    const auto& buf = model_->buffer();
    for (std::size_t i = next_index_.size(); i < buf.size(); ++i) {
        next_index_.push_back(intern(buf[i].next_state));
    }

    beta_ = episode_beta(*model_, config_, t);
    const std::size_t n = buf.size();
    const std::size_t horizon = config_.horizon;
    values_ = EpisodeValueTable(horizon, n);
    projections_.assign(horizon + 1, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));

    std::vector<double> offsets(states_.size(), 0.0);
    if (config_.target_perturbation) {
        for (std::size_t d = 0; d < states_.size(); ++d) offsets[d] = config_.target_perturbation(states_[d]);
    }

    std::vector<double> v_state(states_.size());
    for (std::size_t h = horizon; h > 0; --h) {
        if (n > 0) {
            Eigen::VectorXd targets = values_.at(h + 1);
            if (h + 1 <= horizon) {
                for (std::size_t i = 0; i < n; ++i) targets(static_cast<Eigen::Index>(i)) += offsets[next_index_[i]];
            }
            projections_[h] = model_->value_projection(targets);
        }
        // Values only need evaluating where they will be regressed on.
        if (h == 1) break;
        for (std::size_t d = 0; d < states_.size(); ++d) {
            double best = 0.0;
            for (std::size_t a = 0; a < config_.actions.size(); ++a) {
                const double q = q_from_factor(h, states_[d], a, factors_[d][a]);
                if (a == 0 || q > best) best = q;
            }
            v_state[d] = std::min(static_cast<double>(horizon), best);
        }
        Eigen::VectorXd& out = values_.at(h);
        for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i)) = v_state[next_index_[i]];
    }
    // v_1 is never a regression target but is part of the table.
    Eigen::VectorXd& v1 = values_.at(1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t d = next_index_[i];
        double best = 0.0;
        for (std::size_t a = 0; a < config_.actions.size(); ++a) {
            const double q = q_from_factor(1, states_[d], a, factors_[d][a]);
            if (a == 0 || q > best) best = q;
        }
        v1(static_cast<Eigen::Index>(i)) = std::min(static_cast<double>(horizon), best);
    }
}

double CmeRlAgent::q_from_factor(std::size_t h, const Point& state, std::size_t action,
                                 const QueryFactor& f) const {
    double mean = 0.0;
    if (f.u.size() > 0) mean = f.u.dot(projections_[h]);
    return reward_(state, action) + mean + coefficient_ * beta_ * std::sqrt(f.variance);
}

double CmeRlAgent::q_value(std::size_t h, const Point& state, std::size_t action) const {
    if (episode_ == 0) throw Error("agent: begin_episode has not been called");
    if (h < 1 || h > config_.horizon) throw Error("agent: step out of range");
    if (action >= config_.actions.size()) throw Error("agent: action index out of range");
    if (const auto* row = cached(state)) return q_from_factor(h, state, action, (*row)[action]);
    return q_from_factor(h, state, action, model_->factor_query(join(state, config_.actions[action])));
}

double CmeRlAgent::variance(const Point& state, std::size_t action) const {
    if (action >= config_.actions.size()) throw Error("agent: action index out of range");
    if (const auto* row = cached(state)) return (*row)[action].variance;
    return model_->predictive_variance(join(state, config_.actions[action]));
}

double CmeRlAgent::bonus(const Point& state, std::size_t action) const {
    return coefficient_ * beta_ * std::sqrt(variance(state, action));
}

std::pair<std::size_t, double> CmeRlAgent::select_action(std::size_t h, const Point& state) const {
    std::size_t best = 0;
    double best_q = 0.0;
    for (std::size_t a = 0; a < config_.actions.size(); ++a) {
        const double q = q_value(h, state, a);
        if (a == 0 || q > best_q) {
            best = a;
            best_q = q;
        }
    }
    return {best, best_q};
}

void CmeRlAgent::absorb(const std::vector<Transition>& transitions) {
    for (const auto& tr : transitions) model_->append(tr);
}

PolicyTrace CmeRlAgent::run_episode(const Environment& env, Rng& rng, std::size_t t) {
    begin_episode(t, [&env](const Point& s, std::size_t a) { return env.reward(s, a); });
    return play_episode(env, rng);
}

PolicyTrace CmeRlAgent::play_episode(const Environment& env, Rng& rng) {
    if (episode_ == 0) throw Error("agent: begin_episode has not been called");
    if (env.horizon() != config_.horizon) throw Error("agent: environment horizon mismatch");
    if (env.num_actions() != config_.actions.size()) throw Error("agent: environment action count mismatch");
    const std::size_t t = episode_;

    PolicyTrace trace;
    std::vector<Transition> transitions;
    Point state = env.reset(t);
    for (std::size_t h = 1; h <= config_.horizon; ++h) {
        const auto [action, q] = select_action(h, state);
        StepResult step = env.step(state, action, rng);

        StepTrace st;
        st.action = action;
        st.reward = step.reward;
        st.state = state;
        st.next_state = step.next_state;
        st.q = q;
        st.variance = variance(state, action);
        st.bonus = coefficient_ * beta_ * std::sqrt(st.variance);
        trace.push_back(st);

        Transition tr;
        tr.state = state;
        tr.action = action;
        tr.action_point = config_.actions[action];
        tr.next_state = step.next_state;
        tr.reward = step.reward;
        tr.episode = t;
        tr.step = h;
        transitions.push_back(std::move(tr));
        state = std::move(step.next_state);
    }
    absorb(transitions);
    return trace;
}

}  // namespace cmerl
