#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace cmerl {

/// Lower Cholesky factor L of (K + lambda I) that grows one row at a time.
///
/// Rows are stored in a capacity-doubling buffer so that appending a point
/// costs one triangular solve, O(n^2), and never refactors from scratch.
/// If a pivot fails, the factorization is retried once with diagonal jitter
/// 1e-10 * trace(K) / n; a second failure is an error.
class CholeskyState {
public:
    explicit CholeskyState(double lambda = 1.0);

    /// Factor of gram + lambda I in one shot.
    static CholeskyState from_gram(const Eigen::MatrixXd& gram, double lambda);

    /// Absorbs one point given its kernel column against the existing points
    /// and its self-similarity k(x, x).
    void append(const Eigen::VectorXd& cross, double self_k);

    [[nodiscard]] std::size_t size() const { return n_; }
    [[nodiscard]] double lambda() const { return lambda_; }

    /// Total diagonal jitter that had to be added so far.
    [[nodiscard]] double jitter() const { return jitter_; }

    [[nodiscard]] Eigen::Block<const Eigen::MatrixXd> lower() const {
        return storage_.topLeftCorner(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    }

    [[nodiscard]] double diagonal(std::size_t i) const {
        return storage_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    }

    /// Row i of L restricted to its first i entries.
    [[nodiscard]] auto row_head(std::size_t i) const {
        return storage_.row(static_cast<Eigen::Index>(i)).head(static_cast<Eigen::Index>(i));
    }

    /// L^{-1} b.
    [[nodiscard]] Eigen::VectorXd solve_lower(const Eigen::VectorXd& b) const;

    /// (K + lambda I)^{-1} b.
    [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

    /// log det(K + lambda I) = 2 sum log L_ii.
    [[nodiscard]] double log_det() const;

private:
    void reserve(std::size_t capacity);

    Eigen::MatrixXd storage_;
    std::size_t n_ = 0;
    double lambda_;
    double trace_k_ = 0.0;
    double jitter_ = 0.0;
};

/// In-place update of a lower Cholesky factor so that L L^T becomes
/// L L^T + x x^T.  O(m^2).
void rank_one_update(Eigen::MatrixXd& lower, Eigen::VectorXd x);

}  // namespace cmerl
