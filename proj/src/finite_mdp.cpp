#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cmerl/env.hpp"

namespace cmerl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& env_name,
                          std::uint64_t run_index) {
    std::uint64_t h = splitmix64(master_seed);
    h = splitmix64(h ^ fnv1a(env_name));
    return splitmix64(h ^ run_index);
}

FiniteMdp::FiniteMdp(std::size_t s, std::size_t a, std::size_t h, std::size_t s_init)
    : num_states(s),
      num_actions(a),
      horizon(h),
      initial_state(s_init),
      transitions(s * a * s, 0.0),
      rewards(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a))) {}

Eigen::VectorXd FiniteMdp::row(std::size_t s, std::size_t a) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(num_states));
    for (std::size_t next = 0; next < num_states; ++next) {
        r(static_cast<Eigen::Index>(next)) = p(s, a, next);
    }
    return r;
}

void FiniteMdp::validate() const {
    if (num_states == 0 || num_actions == 0) throw Error("finite MDP: S and A must be positive");
    if (horizon == 0) throw Error("finite MDP: horizon must be >= 1");
    if (initial_state >= num_states) throw Error("finite MDP: s_init out of range");
    if (transitions.size() != num_states * num_actions * num_states) {
        throw Error("finite MDP: transition tensor has wrong size");
    }
    if (rewards.rows() != static_cast<Eigen::Index>(num_states) ||
        rewards.cols() != static_cast<Eigen::Index>(num_actions)) {
        throw Error("finite MDP: reward table has wrong shape");
    }
    for (std::size_t s = 0; s < num_states; ++s) {
        for (std::size_t a = 0; a < num_actions; ++a) {
            double sum = 0.0;
            for (std::size_t next = 0; next < num_states; ++next) {
                const double q = p(s, a, next);
                if (!(q >= 0.0)) {
                    throw Error("finite MDP: negative transition probability at (" +
                                std::to_string(s) + ", " + std::to_string(a) + ")");
                }
                sum += q;
            }
            if (std::abs(sum - 1.0) > 1e-12) {
                std::ostringstream msg;
                msg << "finite MDP: row P(.|" << s << ", " << a << ") sums to " << sum;
                throw Error(msg.str());
            }
            const double r = rewards(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
            if (!(r >= 0.0 && r <= 1.0)) throw Error("finite MDP: rewards must lie in [0, 1]");
        }
    }
}

double FiniteMdp::embedding_hs_norm() const {
    double sum = 0.0;
    for (double q : transitions) sum += q * q;
    return std::sqrt(sum);
}

FiniteMdp finite_mdp_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        FiniteMdp mdp(j.at("S").get<std::size_t>(), j.at("A").get<std::size_t>(),
                      j.at("H").get<std::size_t>(), j.at("s_init").get<std::size_t>());
        const auto& p = j.at("P");
        const auto& r = j.at("R");
        if (p.size() != mdp.num_states || r.size() != mdp.num_states) {
            throw Error("finite MDP JSON: P and R need S rows");
        }
        for (std::size_t s = 0; s < mdp.num_states; ++s) {
            if (p[s].size() != mdp.num_actions || r[s].size() != mdp.num_actions) {
                throw Error("finite MDP JSON: P[s] and R[s] need A entries");
            }
            for (std::size_t a = 0; a < mdp.num_actions; ++a) {
                if (p[s][a].size() != mdp.num_states) {
                    throw Error("finite MDP JSON: P[s][a] needs S entries");
                }
                for (std::size_t next = 0; next < mdp.num_states; ++next) {
                    mdp.p(s, a, next) = p[s][a][next].get<double>();
                }
                mdp.rewards(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
                    r[s][a].get<double>();
            }
        }
        mdp.validate();
        return mdp;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("finite MDP JSON: ") + e.what());
    }
}

FiniteMdp load_finite_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open MDP file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return finite_mdp_from_json(buf.str());
}

std::string finite_mdp_to_json(const FiniteMdp& mdp) {
    nlohmann::json j;
    j["S"] = mdp.num_states;
    j["A"] = mdp.num_actions;
    j["H"] = mdp.horizon;
    j["s_init"] = mdp.initial_state;
    nlohmann::json p = nlohmann::json::array();
    nlohmann::json r = nlohmann::json::array();
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
        nlohmann::json ps = nlohmann::json::array();
        nlohmann::json rs = nlohmann::json::array();
        for (std::size_t a = 0; a < mdp.num_actions; ++a) {
            std::vector<double> row(mdp.num_states);
            for (std::size_t next = 0; next < mdp.num_states; ++next) row[next] = mdp.p(s, a, next);
            ps.push_back(row);
            rs.push_back(mdp.rewards(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)));
        }
        p.push_back(ps);
        r.push_back(rs);
    }
    j["P"] = p;
    j["R"] = r;
    return j.dump();
}

FiniteEnv::FiniteEnv(std::string name, FiniteMdp mdp, std::string description)
    : name_(std::move(name)), description_(std::move(description)), mdp_(std::move(mdp)) {
    mdp_.validate();
    for (std::size_t a = 0; a < mdp_.num_actions; ++a) {
        actions_.push_back(one_hot(a, mdp_.num_actions));
    }
}

std::unique_ptr<Environment> FiniteEnv::clone() const { return std::make_unique<FiniteEnv>(*this); }

Point FiniteEnv::state_point(std::size_t s) const { return one_hot(s, mdp_.num_states); }

std::size_t FiniteEnv::state_index(const Point& state) const {
    if (static_cast<std::size_t>(state.size()) != mdp_.num_states) {
        throw Error("finite env: state has wrong dimension");
    }
    Eigen::Index idx = 0;
    state.maxCoeff(&idx);
    const auto ones = (state.array() == 1.0).count();
    const auto zeros = (state.array() == 0.0).count();
    if (ones != 1 || zeros != state.size() - 1) {
        throw Error("finite env: state is not a one-hot point");
    }
    return static_cast<std::size_t>(idx);
}

Point FiniteEnv::reset(std::size_t /*episode*/) const { return state_point(mdp_.initial_state); }

double FiniteEnv::reward(const Point& state, std::size_t action) const {
    if (action >= mdp_.num_actions) throw Error("finite env: action index out of range");
    return mdp_.rewards(static_cast<Eigen::Index>(state_index(state)),
                        static_cast<Eigen::Index>(action));
}

std::size_t FiniteEnv::sample_next(std::size_t s, std::size_t a, Rng& rng) const {
    if (s >= mdp_.num_states || a >= mdp_.num_actions) {
        throw Error("finite env: state or action index out of range");
    }
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double u = uniform(rng);
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t next = 0; next < mdp_.num_states; ++next) {
        const double q = mdp_.p(s, a, next);
        if (q > 0.0) last_positive = next;
        cumulative += q;
        if (u < cumulative) return next;
    }
    return last_positive;
}

StepResult FiniteEnv::step(const Point& state, std::size_t action, Rng& rng) const {
    const std::size_t s = state_index(state);
    StepResult out;
    out.reward = reward(state, action);
    out.next_state = state_point(sample_next(s, action, rng));
    return out;
}

std::vector<Point> FiniteEnv::sample_inputs(std::size_t count, Rng& rng) const {
    std::vector<Point> all;
    for (std::size_t s = 0; s < mdp_.num_states; ++s) {
        for (std::size_t a = 0; a < mdp_.num_actions; ++a) {
            all.push_back(join(state_point(s), actions_[a]));
        }
    }
    if (count >= all.size()) return all;
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(count);
    return all;
}

}  // namespace cmerl
