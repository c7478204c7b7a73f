#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cmerl/kernel.hpp"

namespace cmerl {

enum class SketchKind { RandomFourier, Nystrom };

/// Finite-dimensional feature map z(x) with <z(x), z(y)> approximating k(x, y).
///
/// Random Fourier sketches use paired cos/sin features, so m must be even and
/// <z(x), z(x)> equals k(x, x) exactly.  Nystrom sketches whiten the landmark
/// kernel column with the symmetric pseudo-inverse square root of the landmark
/// gram matrix, which makes the approximation exact on the landmarks.
/// Sketches are immutable once built.
class FeatureSketch {
public:
    static FeatureSketch random_fourier(const KernelSpec& kernel, std::size_t input_dim,
                                        std::size_t m, std::uint64_t seed);
    static FeatureSketch nystrom(const KernelSpec& kernel, std::vector<Point> landmarks);

    [[nodiscard]] SketchKind kind() const { return kind_; }
    [[nodiscard]] std::size_t dimension() const { return m_; }
    [[nodiscard]] const KernelSpec& kernel() const { return kernel_; }

    [[nodiscard]] Eigen::VectorXd features(const Point& x) const;
    [[nodiscard]] double approx_kernel(const Point& x, const Point& y) const;

private:
    FeatureSketch(SketchKind kind, KernelSpec kernel, std::size_t m)
        : kind_(kind), kernel_(kernel), m_(m) {}

    SketchKind kind_;
    KernelSpec kernel_;
    std::size_t m_;
    // RandomFourier: one frequency per row, m/2 rows.
    Eigen::MatrixXd frequencies_;
    // Nystrom.
    std::vector<Point> landmarks_;
    Eigen::MatrixXd whitening_;
};

}  // namespace cmerl
