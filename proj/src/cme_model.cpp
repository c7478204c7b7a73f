#include "cmerl/cme_model.hpp"

#include <cmath>
#include <sstream>

namespace cmerl {

void ReplayBuffer::push(Transition tr) {
    validate(tr);
    Point input = tr.input();
    inputs_.push_back(std::move(input));
    transitions_.push_back(std::move(tr));
}

void ReplayBuffer::validate(const Transition& tr) const {
    if (tr.episode < 1 || tr.step < 1) {
        throw Error("replay buffer: episode and step indices start at 1");
    }
    if (!(tr.reward >= 0.0 && tr.reward <= 1.0)) {
        throw Error("replay buffer: reward must lie in [0, 1]");
    }
    if (!transitions_.empty()) {
        const Transition& last = transitions_.back();
        const bool increasing = tr.episode > last.episode ||
                                (tr.episode == last.episode && tr.step > last.step);
        if (!increasing) {
            std::ostringstream msg;
            msg << "replay buffer: transition (episode " << tr.episode << ", step " << tr.step
                << ") does not follow (episode " << last.episode << ", step " << last.step << ")";
            throw Error(msg.str());
        }
    }
    const Point input = tr.input();
    check_finite(input);
    check_finite(tr.next_state);
    if (!inputs_.empty() && inputs_.front().size() != input.size()) {
        throw Error("replay buffer: state-action dimension changed");
    }
}

void ConfidenceConfig::validate() const {
    auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
    if (!positive(lambda)) throw Error("confidence config: lambda must be positive");
    if (!(delta > 0.0 && delta <= 1.0)) throw Error("confidence config: delta must lie in (0, 1]");
    if (!positive(b_p)) throw Error("confidence config: b_p must be positive");
    if (!positive(b_v)) throw Error("confidence config: b_v must be positive");
    if (!positive(b_phi)) throw Error("confidence config: b_phi must be positive");
    if (!(zeta >= 0.0)) throw Error("confidence config: zeta must be nonnegative");
    if (!(one_norm >= 0.0)) throw Error("confidence config: one_norm must be nonnegative");
}

double clamp_variance(double variance) {
    if (variance < -1e-10) {
        std::ostringstream msg;
        msg << "predictive variance " << variance << " is negative beyond tolerance";
        throw Error(msg.str());
    }
    return variance < 0.0 ? 0.0 : variance;
}

double EmbeddingModel::mean_embedding_prediction(const Point& input,
                                                 const Eigen::VectorXd& values) const {
    if (static_cast<std::size_t>(values.size()) != size()) {
        throw Error("mean embedding prediction: value vector has length " +
                    std::to_string(values.size()) + ", expected " + std::to_string(size()));
    }
    if (size() == 0) return 0.0;
    return factor_query(input).u.dot(value_projection(values));
}

CmeModel::CmeModel(KernelSpec kernel, double lambda) : kernel_(kernel), chol_(lambda) {
    kernel_.validate();
}

void CmeModel::check_dimension(const Point& input) const {
    if (!buffer_.empty() && buffer_.inputs().front().size() != input.size()) {
        throw Error("query dimension " + std::to_string(input.size()) +
                    " does not match buffered points of dimension " +
                    std::to_string(buffer_.inputs().front().size()));
    }
}

void CmeModel::append(const Transition& tr) {
    const Point input = tr.input();
    check_dimension(input);
    const Eigen::VectorXd cross = cross_kernel(input);
    const double self_k = eval_kernel(kernel_, input, input);
    const double jitter_before = chol_.jitter();

    buffer_.validate(tr);
    chol_.append(cross, self_k);
    buffer_.push(tr);

    const double lam = chol_.lambda();
    const double pivot = chol_.diagonal(chol_.size() - 1);
    const double sigma2 = pivot * pivot - lam - (chol_.jitter() - jitter_before);
    logdet_ += 2.0 * std::log(pivot) - std::log(lam);
    potential_ += clamp_variance(sigma2) / lam;
}

Eigen::VectorXd CmeModel::cross_kernel(const Point& input) const {
    check_dimension(input);
    return cmerl::cross_kernel(kernel_, buffer_.inputs(), input);
}

Eigen::VectorXd CmeModel::alpha_weights(const Point& input) const {
    return chol_.solve(cross_kernel(input));
}

QueryFactor CmeModel::factor_query(const Point& input) const {
    QueryFactor q;
    q.input = input;
    q.u = chol_.solve_lower(cross_kernel(input));
    q.fitted_size = size();
    q.variance = clamp_variance(eval_kernel(kernel_, input, input) - q.u.squaredNorm());
    return q;
}

void CmeModel::refresh_query(QueryFactor& q) const {
    const std::size_t n = size();
    if (q.fitted_size == n) return;
    if (q.fitted_size > n) throw Error("query factor is newer than the model");
    check_dimension(q.input);
    q.u.conservativeResize(static_cast<Eigen::Index>(n));
    // Forward substitution restricted to the rows added since the last refresh.
    for (std::size_t j = q.fitted_size; j < n; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double kj = eval_kernel(kernel_, buffer_.inputs()[j], q.input);
        const double dot = chol_.row_head(j).dot(q.u.head(jj));
        q.u(jj) = (kj - dot) / chol_.diagonal(j);
    }
    q.fitted_size = n;
    q.variance = clamp_variance(eval_kernel(kernel_, q.input, q.input) - q.u.squaredNorm());
}

Eigen::VectorXd CmeModel::value_projection(const Eigen::VectorXd& v) const {
    return chol_.solve_lower(v);
}

double beta_from_info_gain(double info_gain, const ConfidenceConfig& cfg, std::size_t t,
                           std::size_t horizon, double delta_eff) {
    if (!(delta_eff > 0.0 && delta_eff <= 1.0)) throw Error("beta: delta must lie in (0, 1]");
    if (t < 1 || horizon < 1) throw Error("beta: episode and horizon must be >= 1");
    const double lam = cfg.lambda;
    const double td = static_cast<double>(t);
    const double log_term = std::log(2.0 * td * td * static_cast<double>(horizon) / delta_eff);
    return std::sqrt(2.0 * lam * cfg.b_p * cfg.b_p +
                     256.0 * (1.0 + 1.0 / lam) * info_gain * log_term);
}

double beta(const EmbeddingModel& model, const ConfidenceConfig& cfg, std::size_t t,
            std::size_t horizon, double delta_eff) {
    return beta_from_info_gain(model.info_gain(), cfg, t, horizon, delta_eff);
}

}  // namespace cmerl
