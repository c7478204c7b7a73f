#include "cmerl/cholesky.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "cmerl/kernel.hpp"

namespace cmerl {

namespace {

constexpr double kJitterFactor = 1e-10;

}  // namespace

CholeskyState::CholeskyState(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw Error("cholesky: regularizer lambda must be positive");
    }
}

CholeskyState CholeskyState::from_gram(const Eigen::MatrixXd& gram, double lambda) {
    CholeskyState state(lambda);
    if (gram.rows() != gram.cols()) {
        throw Error("cholesky: gram matrix must be square");
    }
    const auto n = static_cast<std::size_t>(gram.rows());
    if (n == 0) return state;

    const Eigen::Index dim = gram.rows();
    Eigen::MatrixXd regularized = gram;
    regularized.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(regularized);
    double jitter = 0.0;
    if (llt.info() != Eigen::Success) {
        jitter = kJitterFactor * gram.trace() / static_cast<double>(n);
        regularized.diagonal().array() += jitter;
        llt.compute(regularized);
        if (llt.info() != Eigen::Success) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
            std::ostringstream msg;
            msg << "cholesky: gram matrix is not positive semi-definite (smallest eigenvalue "
                << eig.eigenvalues().minCoeff() << ")";
            throw Error(msg.str());
        }
    }
    state.reserve(n);
    state.storage_.topLeftCorner(dim, dim) = llt.matrixL();
    state.n_ = n;
    state.trace_k_ = gram.trace();
    state.jitter_ = jitter;
    return state;
}

void CholeskyState::reserve(std::size_t capacity) {
    if (static_cast<Eigen::Index>(capacity) <= storage_.rows()) return;
    const auto cap = static_cast<Eigen::Index>(
        std::max<std::size_t>(capacity, 2 * static_cast<std::size_t>(storage_.rows())));
    Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(cap, cap);
    const auto n = static_cast<Eigen::Index>(n_);
    grown.topLeftCorner(n, n) = storage_.topLeftCorner(n, n);
    storage_.swap(grown);
}

void CholeskyState::append(const Eigen::VectorXd& cross, double self_k) {
    if (static_cast<std::size_t>(cross.size()) != n_) {
        throw Error("cholesky append: cross vector has length " + std::to_string(cross.size()) +
                    ", expected " + std::to_string(n_));
    }
    const Eigen::VectorXd l = solve_lower(cross);
    double pivot_sq = self_k + lambda_ - l.squaredNorm();
    double jitter = 0.0;
    if (!(pivot_sq > 0.0)) {
        jitter = kJitterFactor * (trace_k_ + self_k) / static_cast<double>(n_ + 1);
        pivot_sq += jitter;
        if (!(pivot_sq > 0.0)) {
            std::ostringstream msg;
            msg << "cholesky append: non-positive pivot " << pivot_sq << " after jitter";
            throw Error(msg.str());
        }
    }
    reserve(n_ + 1);
    const auto i = static_cast<Eigen::Index>(n_);
    storage_.row(i).head(i) = l.transpose();
    storage_(i, i) = std::sqrt(pivot_sq);
    ++n_;
    trace_k_ += self_k;
    jitter_ += jitter;
}

Eigen::VectorXd CholeskyState::solve_lower(const Eigen::VectorXd& b) const {
    if (static_cast<std::size_t>(b.size()) != n_) {
        throw Error("cholesky solve: right-hand side has wrong length");
    }
    if (n_ == 0) return Eigen::VectorXd();
    return lower().triangularView<Eigen::Lower>().solve(b);
}

Eigen::VectorXd CholeskyState::solve(const Eigen::VectorXd& b) const {
    if (n_ == 0) {
        if (b.size() != 0) throw Error("cholesky solve: right-hand side has wrong length");
        return Eigen::VectorXd();
    }
    const Eigen::VectorXd y = solve_lower(b);
    return lower().transpose().triangularView<Eigen::Upper>().solve(y);
}

double CholeskyState::log_det() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) sum += std::log(diagonal(i));
    return 2.0 * sum;
}

void rank_one_update(Eigen::MatrixXd& lower, Eigen::VectorXd x) {
    const Eigen::Index m = lower.rows();
    if (lower.cols() != m || x.size() != m) {
        throw Error("rank_one_update: dimension mismatch");
    }
    for (Eigen::Index k = 0; k < m; ++k) {
        const double lkk = lower(k, k);
        const double r = std::hypot(lkk, x(k));
        const double c = r / lkk;
        const double s = x(k) / lkk;
        lower(k, k) = r;
        if (k + 1 < m) {
            const Eigen::Index rest = m - k - 1;
            lower.col(k).tail(rest) = (lower.col(k).tail(rest) + s * x.tail(rest)) / c;
            x.tail(rest) = c * x.tail(rest) - s * lower.col(k).tail(rest);
        }
    }
}

}  // namespace cmerl
