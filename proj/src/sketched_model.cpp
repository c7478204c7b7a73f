#include "cmerl/sketched_model.hpp"

#include <cmath>

#include "cmerl/cholesky.hpp"

namespace cmerl {

SketchedCmeModel::SketchedCmeModel(FeatureSketch sketch, double lambda)
    : sketch_(std::move(sketch)), lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw Error("sketched model: lambda must be positive");
    }
    const auto m = static_cast<Eigen::Index>(sketch_.dimension());
    lower_ = std::sqrt(lambda_) * Eigen::MatrixXd::Identity(m, m);
}

void SketchedCmeModel::append(const Transition& tr) {
    buffer_.validate(tr);
    Eigen::VectorXd z = sketch_.features(tr.input());
    const Eigen::VectorXd u = lower_.triangularView<Eigen::Lower>().solve(z);
    const double ratio = u.squaredNorm();
    rank_one_update(lower_, z);
    buffer_.push(tr);
    features_.push_back(std::move(z));
    logdet_ += std::log1p(ratio);
    potential_ += ratio;
}

QueryFactor SketchedCmeModel::factor_query(const Point& input) const {
    QueryFactor q;
    q.input = input;
    q.fitted_size = size();
    q.u = lower_.triangularView<Eigen::Lower>().solve(sketch_.features(input));
    q.variance = lambda_ * q.u.squaredNorm();
    return q;
}

void SketchedCmeModel::refresh_query(QueryFactor& q) const {
    if (q.fitted_size == size()) return;
    q = factor_query(q.input);
}

Eigen::VectorXd SketchedCmeModel::value_projection(const Eigen::VectorXd& v) const {
    if (static_cast<std::size_t>(v.size()) != size()) {
        throw Error("sketched model: value vector has wrong length");
    }
    Eigen::VectorXd zt_v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sketch_.dimension()));
    for (std::size_t i = 0; i < features_.size(); ++i) {
        zt_v += v(static_cast<Eigen::Index>(i)) * features_[i];
    }
    return lower_.triangularView<Eigen::Lower>().solve(zt_v);
}

}  // namespace cmerl
