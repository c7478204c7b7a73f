#include <sstream>

#include "cmerl/env.hpp"

namespace cmerl {

// chain2: action 0 = go (0 -> 1), action 1 = stay; state 1 absorbs.
// R(s, a) = 1 iff s = 1.
FiniteMdp make_chain2() {
    FiniteMdp mdp(2, 2, 2, 0);
    mdp.p(0, 0, 1) = 1.0;
    mdp.p(0, 1, 0) = 1.0;
    mdp.p(1, 0, 1) = 1.0;
    mdp.p(1, 1, 1) = 1.0;
    mdp.rewards(1, 0) = 1.0;
    mdp.rewards(1, 1) = 1.0;
    return mdp;
}

// Classic six-state RiverSwim (action 0 = left, action 1 = right) with the
// rewards 5 and 10000 rescaled to 0.0005 and 1.
FiniteMdp make_riverswim6() {
    constexpr std::size_t n = 6;
    FiniteMdp mdp(n, 2, 10, 0);
    for (std::size_t s = 0; s < n; ++s) {
        mdp.p(s, 0, s == 0 ? 0 : s - 1) = 1.0;
        if (s == 0) {
            mdp.p(s, 1, 0) = 0.4;
            mdp.p(s, 1, 1) = 0.6;
        } else if (s == n - 1) {
            mdp.p(s, 1, s) = 0.6;
            mdp.p(s, 1, s - 1) = 0.4;
        } else {
            mdp.p(s, 1, s + 1) = 0.35;
            mdp.p(s, 1, s) = 0.6;
            mdp.p(s, 1, s - 1) = 0.05;
        }
    }
    mdp.rewards(0, 0) = 5.0 / 10000.0;
    mdp.rewards(n - 1, 1) = 1.0;
    return mdp;
}

// 4x4 grid, start in the top-left corner, reward 1 in the bottom-right goal
// cell.  Actions up/down/left/right; with probability 0.1 the move direction
// is replaced by a uniformly random one.  Walls keep the agent in place.
FiniteMdp make_gridworld4x4() {
    constexpr std::size_t side = 4;
    constexpr std::size_t n = side * side;
    constexpr double slip = 0.1;
    FiniteMdp mdp(n, 4, 8, 0);
    auto move = [&](std::size_t s, std::size_t dir) {
        std::size_t r = s / side;
        std::size_t c = s % side;
        switch (dir) {
            case 0: r = r == 0 ? 0 : r - 1; break;
            case 1: r = r + 1 < side ? r + 1 : r; break;
            case 2: c = c == 0 ? 0 : c - 1; break;
            default: c = c + 1 < side ? c + 1 : c; break;
        }
        return r * side + c;
    };
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t a = 0; a < 4; ++a) {
            mdp.p(s, a, move(s, a)) += 1.0 - slip;
            for (std::size_t d = 0; d < 4; ++d) mdp.p(s, a, move(s, d)) += slip / 4.0;
            if (s == n - 1) mdp.rewards(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = 1.0;
        }
    }
    return mdp;
}

namespace {

std::unique_ptr<Environment> make_nlds2d() {
    NonlinearGaussianEnv::Params p;
    p.horizon = 4;
    p.noise_std = 0.1;
    p.box = 2.0;
    p.weights.resize(2, 4);
    p.weights << 0.8, 0.2, 1.0, 0.0,
                -0.2, 0.8, 0.0, 1.0;
    p.action_effects = {Point::Zero(2), Point::Zero(2), Point::Zero(2), Point::Zero(2)};
    p.action_effects[0] << 0.5, 0.0;
    p.action_effects[1] << -0.5, 0.0;
    p.action_effects[2] << 0.0, 0.5;
    p.action_effects[3] << 0.0, -0.5;
    p.initial_state = Point::Zero(2);
    p.goal = Point::Ones(2);
    return std::make_unique<NonlinearGaussianEnv>("nlds2d", std::move(p));
}

}  // namespace

std::vector<std::string> standard_env_names() {
    return {"chain2", "riverswim6", "gridworld4x4", "nlds2d"};
}

std::unique_ptr<Environment> make_standard_env(const std::string& name) {
    if (name == "chain2") {
        return std::make_unique<FiniteEnv>(
            name, make_chain2(), "S=2 A=2 H=2 deterministic chain; go moves 0->1, reward 1 in state 1");
    }
    if (name == "riverswim6") {
        return std::make_unique<FiniteEnv>(
            name, make_riverswim6(), "S=6 A=2 H=10 RiverSwim, rewards rescaled to [0, 1]");
    }
    if (name == "gridworld4x4") {
        return std::make_unique<FiniteEnv>(
            name, make_gridworld4x4(), "S=16 A=4 H=8 grid with slip probability 0.1, goal reward 1");
    }
    if (name == "nlds2d") return make_nlds2d();

    std::ostringstream msg;
    msg << "unknown environment '" << name << "'; available:";
    for (const auto& n : standard_env_names()) msg << ' ' << n;
    throw Error(msg.str());
}

std::unique_ptr<Environment> resolve_env(const std::string& name_or_path) {
    const std::string suffix = ".json";
    if (name_or_path.size() > suffix.size() &&
        name_or_path.compare(name_or_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
        return std::make_unique<FiniteEnv>(name_or_path, load_finite_mdp(name_or_path),
                                           "custom finite MDP loaded from JSON");
    }
    return make_standard_env(name_or_path);
}

}  // namespace cmerl
