#include "cmerl/sketch.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

namespace cmerl {

FeatureSketch FeatureSketch::random_fourier(const KernelSpec& kernel, std::size_t input_dim,
                                            std::size_t m, std::uint64_t seed) {
    kernel.validate();
    if (m == 0) throw Error("random Fourier sketch needs m > 0 features");
    if (m % 2 != 0) throw Error("random Fourier sketch needs an even feature count (cos/sin pairs)");
    if (input_dim == 0) throw Error("random Fourier sketch needs input dimension >= 1");
    if (kernel.family != KernelFamily::SquaredExponential && kernel.family != KernelFamily::Matern) {
        throw Error("random Fourier features require a continuous stationary kernel (got " +
                    to_string(kernel.family) + ")");
    }

    FeatureSketch sketch(SketchKind::RandomFourier, kernel, m);
    const auto pairs = static_cast<Eigen::Index>(m / 2);
    const auto dim = static_cast<Eigen::Index>(input_dim);
    sketch.frequencies_.resize(pairs, dim);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index r = 0; r < pairs; ++r) {
        // Matern spectral densities are multivariate Student-t with 2 nu dof.
        double scale = 1.0 / kernel.lengthscale;
        if (kernel.family == KernelFamily::Matern) {
            const double nu = nu_value(kernel.nu);
            std::gamma_distribution<double> chi2(nu, 2.0);
            scale *= std::sqrt(2.0 * nu / chi2(rng));
        }
        for (Eigen::Index c = 0; c < dim; ++c) sketch.frequencies_(r, c) = scale * normal(rng);
    }
    return sketch;
}

FeatureSketch FeatureSketch::nystrom(const KernelSpec& kernel, std::vector<Point> landmarks) {
    kernel.validate();
    if (landmarks.empty()) throw Error("Nystrom sketch needs at least one landmark");
    const std::size_t m = landmarks.size();
    FeatureSketch sketch(SketchKind::Nystrom, kernel, m);

    const Eigen::MatrixXd k_ll = gram_matrix(kernel, landmarks);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k_ll);
    const Eigen::VectorXd& values = eig.eigenvalues();
    const double cutoff = 1e-12 * std::max(values.maxCoeff(), 0.0) * static_cast<double>(m);
    Eigen::VectorXd inv_sqrt(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        inv_sqrt(i) = values(i) > cutoff ? 1.0 / std::sqrt(values(i)) : 0.0;
    }
    sketch.whitening_ = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
    sketch.landmarks_ = std::move(landmarks);
    return sketch;
}

Eigen::VectorXd FeatureSketch::features(const Point& x) const {
    switch (kind_) {
        case SketchKind::RandomFourier: {
            if (x.size() != frequencies_.cols()) throw Error("sketch features: dimension mismatch");
            const Eigen::Index pairs = frequencies_.rows();
            const Eigen::VectorXd proj = frequencies_ * x;
            const double amp = std::sqrt(kernel_.output_scale / static_cast<double>(pairs));
            Eigen::VectorXd z(2 * pairs);
            z.head(pairs) = amp * proj.array().cos();
            z.tail(pairs) = amp * proj.array().sin();
            return z;
        }
        case SketchKind::Nystrom: return whitening_ * cross_kernel(kernel_, landmarks_, x);
    }
    return {};
}

double FeatureSketch::approx_kernel(const Point& x, const Point& y) const {
    return features(x).dot(features(y));
}

}  // namespace cmerl
