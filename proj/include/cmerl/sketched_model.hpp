#pragma once

#include <vector>

#include <Eigen/Core>

#include "cmerl/cme_model.hpp"
#include "cmerl/sketch.hpp"

namespace cmerl {

/// Primal-form embedding model on sketched features z(x) of dimension m.
///
/// Maintains the Cholesky factor of M = Z^T Z + lambda I by rank-one updates,
/// so appending a transition costs O(m^2) regardless of the buffer size.
/// Predictions: mean = z(q)^T M^{-1} Z^T v, variance = lambda z(q)^T M^{-1} z(q).
class SketchedCmeModel final : public EmbeddingModel {
public:
    SketchedCmeModel(FeatureSketch sketch, double lambda);

    [[nodiscard]] std::size_t size() const override { return buffer_.size(); }
    [[nodiscard]] double lambda() const override { return lambda_; }
    [[nodiscard]] const ReplayBuffer& buffer() const override { return buffer_; }
    [[nodiscard]] double log_det() const override { return logdet_; }
    [[nodiscard]] double potential_sum() const override { return potential_; }
    [[nodiscard]] const FeatureSketch& sketch() const { return sketch_; }

    void append(const Transition& tr) override;

    [[nodiscard]] QueryFactor factor_query(const Point& input) const override;
    void refresh_query(QueryFactor& q) const override;
    [[nodiscard]] Eigen::VectorXd value_projection(const Eigen::VectorXd& v) const override;

private:
    FeatureSketch sketch_;
    double lambda_;
    ReplayBuffer buffer_;
    std::vector<Eigen::VectorXd> features_;
    Eigen::MatrixXd lower_;
    double logdet_ = 0.0;
    double potential_ = 0.0;
};

}  // namespace cmerl
