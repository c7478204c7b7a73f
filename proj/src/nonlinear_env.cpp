#include <cmath>
#include <sstream>

#include "cmerl/env.hpp"

namespace cmerl {

NonlinearGaussianEnv::NonlinearGaussianEnv(std::string name, Params params)
    : name_(std::move(name)), params_(std::move(params)) {
    const Eigen::Index m = params_.initial_state.size();
    if (m < 1) throw Error("nonlinear env: state dimension must be >= 1");
    if (params_.horizon < 1) throw Error("nonlinear env: horizon must be >= 1");
    if (!(params_.noise_std > 0.0)) throw Error("nonlinear env: noise std must be positive");
    if (!(params_.box > 0.0)) throw Error("nonlinear env: clipping box must be positive");
    if (params_.weights.rows() != m || params_.weights.cols() != 2 * m) {
        throw Error("nonlinear env: weight matrix must be m x 2m");
    }
    if (params_.action_effects.empty()) throw Error("nonlinear env: needs at least one action");
    if (params_.goal.size() != m) throw Error("nonlinear env: goal has wrong dimension");
    params_.actions.clear();
    for (std::size_t a = 0; a < params_.action_effects.size(); ++a) {
        if (params_.action_effects[a].size() != m) {
            throw Error("nonlinear env: action effect has wrong dimension");
        }
        params_.actions.push_back(one_hot(a, params_.action_effects.size()));
    }
}

std::unique_ptr<Environment> NonlinearGaussianEnv::clone() const {
    return std::make_unique<NonlinearGaussianEnv>(*this);
}

std::string NonlinearGaussianEnv::description() const {
    std::ostringstream out;
    out << "continuous nonlinear Gaussian system, m=" << state_dimension()
        << ", A=" << params_.actions.size() << ", H=" << params_.horizon
        << ", noise std " << params_.noise_std << ", box [-" << params_.box << ", "
        << params_.box << "]";
    return out.str();
}

Point NonlinearGaussianEnv::reset(std::size_t /*episode*/) const { return params_.initial_state; }

double NonlinearGaussianEnv::reward(const Point& state, std::size_t action) const {
    if (action >= params_.actions.size()) throw Error("nonlinear env: action index out of range");
    if (state.size() != params_.goal.size()) throw Error("nonlinear env: state has wrong dimension");
    return std::exp(-(state - params_.goal).squaredNorm());
}

Point NonlinearGaussianEnv::clip(Point s) const {
    return s.cwiseMax(-params_.box).cwiseMin(params_.box);
}

Point NonlinearGaussianEnv::mean_next_state(const Point& state, std::size_t action) const {
    if (action >= params_.actions.size()) throw Error("nonlinear env: action index out of range");
    if (state.size() != params_.initial_state.size()) {
        throw Error("nonlinear env: state has wrong dimension");
    }
    const Eigen::Index m = state.size();
    Eigen::VectorXd features(2 * m);
    features << state.array().tanh().matrix(), params_.action_effects[action];
    return clip(params_.weights * features);
}

StepResult NonlinearGaussianEnv::step(const Point& state, std::size_t action, Rng& rng) const {
    StepResult out;
    out.reward = reward(state, action);
    const Eigen::Index m = state.size();
    Eigen::VectorXd features(2 * m);
    features << state.array().tanh().matrix(), params_.action_effects.at(action);
    Point next = params_.weights * features;
    std::normal_distribution<double> noise(0.0, params_.noise_std);
    for (Eigen::Index i = 0; i < m; ++i) next(i) += noise(rng);
    out.next_state = clip(std::move(next));
    return out;
}

std::vector<Point> NonlinearGaussianEnv::sample_inputs(std::size_t count, Rng& rng) const {
    std::uniform_real_distribution<double> uniform(-params_.box, params_.box);
    std::uniform_int_distribution<std::size_t> pick(0, params_.actions.size() - 1);
    std::vector<Point> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Point s(params_.initial_state.size());
        for (Eigen::Index d = 0; d < s.size(); ++d) s(d) = uniform(rng);
        out.push_back(join(s, params_.actions[pick(rng)]));
    }
    return out;
}

}  // namespace cmerl
