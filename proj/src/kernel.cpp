#include "cmerl/kernel.hpp"

#include <cmath>

namespace cmerl {

Point one_hot(std::size_t index, std::size_t size) {
    if (index >= size) {
        throw Error("one_hot: index " + std::to_string(index) + " out of range for size " +
                    std::to_string(size));
    }
    Point p = Point::Zero(static_cast<Eigen::Index>(size));
    p(static_cast<Eigen::Index>(index)) = 1.0;
    return p;
}

Point join(const Point& state, const Point& action) {
    Point p(state.size() + action.size());
    p << state, action;
    return p;
}

void check_finite(const Point& x) {
    if (!x.allFinite()) {
        throw Error("point has non-finite coordinates");
    }
}

KernelSpec KernelSpec::squared_exponential(double lengthscale, double scale) {
    return {KernelFamily::SquaredExponential, lengthscale, MaternNu::FiveHalves, scale};
}

KernelSpec KernelSpec::matern(MaternNu nu, double lengthscale, double scale) {
    return {KernelFamily::Matern, lengthscale, nu, scale};
}

KernelSpec KernelSpec::linear(double scale) {
    return {KernelFamily::Linear, 1.0, MaternNu::FiveHalves, scale};
}

KernelSpec KernelSpec::delta(double scale) {
    return {KernelFamily::Delta, 1.0, MaternNu::FiveHalves, scale};
}

void KernelSpec::validate() const {
    if (!(output_scale > 0.0) || !std::isfinite(output_scale)) {
        throw Error("kernel output_scale must be positive");
    }
    if ((family == KernelFamily::SquaredExponential || family == KernelFamily::Matern) &&
        (!(lengthscale > 0.0) || !std::isfinite(lengthscale))) {
        throw Error("kernel lengthscale must be positive");
    }
}

std::string to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::SquaredExponential: return "squared_exponential";
        case KernelFamily::Matern: return "matern";
        case KernelFamily::Linear: return "linear";
        case KernelFamily::Delta: return "delta";
    }
    return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "squared_exponential" || name == "se" || name == "rbf") {
        return KernelFamily::SquaredExponential;
    }
    if (name == "matern") return KernelFamily::Matern;
    if (name == "linear") return KernelFamily::Linear;
    if (name == "delta") return KernelFamily::Delta;
    throw Error("unknown kernel family '" + name +
                "' (expected squared_exponential, matern, linear or delta)");
}

double nu_value(MaternNu nu) {
    switch (nu) {
        case MaternNu::Half: return 0.5;
        case MaternNu::ThreeHalves: return 1.5;
        case MaternNu::FiveHalves: return 2.5;
    }
    return 2.5;
}

MaternNu matern_nu_from_value(double nu) {
    if (nu == 0.5) return MaternNu::Half;
    if (nu == 1.5) return MaternNu::ThreeHalves;
    if (nu == 2.5) return MaternNu::FiveHalves;
    throw Error("Matern nu must be one of 0.5, 1.5, 2.5");
}

double eval_kernel(const KernelSpec& spec, const Point& x, const Point& y) {
    if (x.size() != y.size()) {
        throw Error("eval_kernel: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()) + ")");
    }
    const double s = spec.output_scale;
    switch (spec.family) {
        case KernelFamily::SquaredExponential: {
            const double r2 = (x - y).squaredNorm();
            return s * std::exp(-0.5 * r2 / (spec.lengthscale * spec.lengthscale));
        }
        case KernelFamily::Matern: {
            const double r = (x - y).norm() / spec.lengthscale;
            switch (spec.nu) {
                case MaternNu::Half: return s * std::exp(-r);
                case MaternNu::ThreeHalves: {
                    const double z = std::sqrt(3.0) * r;
                    return s * (1.0 + z) * std::exp(-z);
                }
                case MaternNu::FiveHalves: {
                    const double z = std::sqrt(5.0) * r;
                    return s * (1.0 + z + z * z / 3.0) * std::exp(-z);
                }
            }
            return 0.0;
        }
        case KernelFamily::Linear: return s * x.dot(y);
        case KernelFamily::Delta: return x == y ? s : 0.0;
    }
    return 0.0;
}

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const std::vector<Point>& xs) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = eval_kernel(spec, xs[i], xs[i]);
        for (Eigen::Index j = 0; j < i; ++j) {
            k(i, j) = eval_kernel(spec, xs[i], xs[j]);
            k(j, i) = k(i, j);
        }
    }
    return k;
}

Eigen::VectorXd cross_kernel(const KernelSpec& spec, const std::vector<Point>& xs, const Point& q) {
    Eigen::VectorXd k(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        k(static_cast<Eigen::Index>(i)) = eval_kernel(spec, xs[i], q);
    }
    return k;
}

}  // namespace cmerl
