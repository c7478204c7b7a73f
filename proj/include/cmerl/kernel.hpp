#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cmerl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A point of a state, action or joined state-action space.
using Point = Eigen::VectorXd;

/// One-hot encoding of a discrete index in a space of `size` elements.
Point one_hot(std::size_t index, std::size_t size);

/// Concatenation of state and action coordinates (the kernel input for phi).
Point join(const Point& state, const Point& action);

/// Throws unless every coordinate is finite.
void check_finite(const Point& x);

enum class KernelFamily { SquaredExponential, Matern, Linear, Delta };

/// Half-integer smoothness orders supported in closed form.
enum class MaternNu { Half, ThreeHalves, FiveHalves };

struct KernelSpec {
    KernelFamily family = KernelFamily::SquaredExponential;
    double lengthscale = 1.0;
    MaternNu nu = MaternNu::FiveHalves;
    double output_scale = 1.0;

    static KernelSpec squared_exponential(double lengthscale = 1.0, double scale = 1.0);
    static KernelSpec matern(MaternNu nu, double lengthscale = 1.0, double scale = 1.0);
    static KernelSpec linear(double scale = 1.0);
    static KernelSpec delta(double scale = 1.0);

    /// True for the translation-invariant families (SE, Matern, Delta).
    [[nodiscard]] bool stationary() const { return family != KernelFamily::Linear; }

    /// Throws on non-positive lengthscale or output scale.
    void validate() const;
};

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);
double nu_value(MaternNu nu);
MaternNu matern_nu_from_value(double nu);

double eval_kernel(const KernelSpec& spec, const Point& x, const Point& y);

/// Symmetric gram matrix [k(x_i, x_j)]; the empty list yields a 0x0 matrix.
Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const std::vector<Point>& xs);

/// Column vector [k(x_i, q)]_i.
Eigen::VectorXd cross_kernel(const KernelSpec& spec, const std::vector<Point>& xs, const Point& q);

}  // namespace cmerl
