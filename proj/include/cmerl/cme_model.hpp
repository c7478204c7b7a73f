#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "cmerl/cholesky.hpp"
#include "cmerl/kernel.hpp"

namespace cmerl {

/// One observed step (s_h, a_h, s_{h+1}) of episode t.
struct Transition {
    Point state;
    std::size_t action = 0;
    Point action_point;
    Point next_state;
    double reward = 0.0;
    std::size_t episode = 1;  // t >= 1
    std::size_t step = 1;     // h in [1, H]

    /// Kernel input for phi: state coordinates followed by action coordinates.
    [[nodiscard]] Point input() const { return join(state, action_point); }
};

/// Chronological transition log D_t.  (episode, step) must strictly increase.
class ReplayBuffer {
public:
    void push(Transition tr);

    /// Throws if `tr` cannot be appended (order, reward range, dimension).
    void validate(const Transition& tr) const;

    [[nodiscard]] std::size_t size() const { return transitions_.size(); }
    [[nodiscard]] bool empty() const { return transitions_.empty(); }
    [[nodiscard]] const Transition& operator[](std::size_t i) const { return transitions_[i]; }
    [[nodiscard]] const std::vector<Transition>& transitions() const { return transitions_; }
    [[nodiscard]] const std::vector<Point>& inputs() const { return inputs_; }

private:
    std::vector<Transition> transitions_;
    std::vector<Point> inputs_;
};

/// Scalars that drive the confidence width and the exploration bonus.
struct ConfidenceConfig {
    double lambda = 1.0;
    double delta = 0.1;
    double b_p = 1.0;       // >= ||Theta_P||_HS
    double b_v = 1.0;       // >= ||V||_{H_psi}
    double b_phi = 1.0;     // >= sup sqrt(k_phi(x, x))
    double zeta = 0.0;      // misspecification error
    double one_norm = 0.0;  // >= ||1||_{H_psi}

    void validate() const;
};

/// A query point factored against the current model: the mean prediction
/// for value targets v is `u.dot(model.value_projection(v))` and the
/// predictive variance is `variance`.
struct QueryFactor {
    Point input;
    Eigen::VectorXd u;
    double variance = 0.0;
    std::size_t fitted_size = 0;
};

/// Common interface of the exact kernel model and its sketched counterpart.
class EmbeddingModel {
public:
    virtual ~EmbeddingModel() = default;

    [[nodiscard]] virtual std::size_t size() const = 0;
    [[nodiscard]] virtual double lambda() const = 0;
    [[nodiscard]] virtual const ReplayBuffer& buffer() const = 0;

    /// log det(I + lambda^{-1} K), accumulated as points arrive.
    [[nodiscard]] virtual double log_det() const = 0;

    /// Sum over buffered points of lambda^{-1} sigma^2 evaluated just before
    /// each point was inserted.
    [[nodiscard]] virtual double potential_sum() const = 0;

    virtual void append(const Transition& tr) = 0;

    [[nodiscard]] virtual QueryFactor factor_query(const Point& input) const = 0;

    /// Brings a factor computed against an older (smaller) model up to date.
    virtual void refresh_query(QueryFactor& q) const = 0;

    /// Vector w with mean prediction u.dot(w) for targets v (length size()).
    [[nodiscard]] virtual Eigen::VectorXd value_projection(const Eigen::VectorXd& v) const = 0;

    /// gamma = 1/2 log det(I + lambda^{-1} K).
    [[nodiscard]] double info_gain() const { return 0.5 * log_det(); }

    [[nodiscard]] double predictive_variance(const Point& input) const {
        return factor_query(input).variance;
    }

    /// alpha(q)^T v; 0 on an empty model.
    [[nodiscard]] double mean_embedding_prediction(const Point& input,
                                                   const Eigen::VectorXd& values) const;
};

/// Exact kernelized conditional mean embedding estimate.
///
/// Keeps the dual representation only: alpha(q) = (K + lambda I)^{-1} k(q),
/// sigma^2(q) = k(q, q) - k(q)^T (K + lambda I)^{-1} k(q).
class CmeModel final : public EmbeddingModel {
public:
    CmeModel(KernelSpec kernel, double lambda);

    [[nodiscard]] std::size_t size() const override { return buffer_.size(); }
    [[nodiscard]] double lambda() const override { return chol_.lambda(); }
    [[nodiscard]] const ReplayBuffer& buffer() const override { return buffer_; }
    [[nodiscard]] double log_det() const override { return logdet_; }
    [[nodiscard]] double potential_sum() const override { return potential_; }
    [[nodiscard]] const KernelSpec& kernel() const { return kernel_; }
    [[nodiscard]] const CholeskyState& factor() const { return chol_; }

    void append(const Transition& tr) override;

    [[nodiscard]] QueryFactor factor_query(const Point& input) const override;
    void refresh_query(QueryFactor& q) const override;
    [[nodiscard]] Eigen::VectorXd value_projection(const Eigen::VectorXd& v) const override;

    [[nodiscard]] Eigen::VectorXd cross_kernel(const Point& input) const;
    [[nodiscard]] Eigen::VectorXd alpha_weights(const Point& input) const;

private:
    void check_dimension(const Point& input) const;

    KernelSpec kernel_;
    ReplayBuffer buffer_;
    CholeskyState chol_;
    double logdet_ = 0.0;
    double potential_ = 0.0;
};

/// Confidence width sqrt(2 lambda B_P^2 + 256 (1 + 1/lambda) gamma log(2 t^2 H / delta)),
/// with gamma the model's current information gain.
double beta(const EmbeddingModel& model, const ConfidenceConfig& cfg, std::size_t t,
            std::size_t horizon, double delta_eff);

/// Same formula from an already computed information gain.
double beta_from_info_gain(double info_gain, const ConfidenceConfig& cfg, std::size_t t,
                           std::size_t horizon, double delta_eff);

/// Variance values in [-1e-10, 0) are clamped to 0; anything lower is an error.
double clamp_variance(double variance);

}  // namespace cmerl
