#pragma once

#include "dsopt/core.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <string>

namespace dsopt {

enum class KernelFamily { RBF, Matern32, Matern52 };

const char* name(KernelFamily k);
KernelFamily kernelFamilyFromName(const std::string& s);

/// Stationary ARD kernel: one lengthscale per input dimension and an output scale.
struct KernelSpec {
    KernelFamily family = KernelFamily::RBF;
    VectorXd lengthscales;
    double outputScale = 1.0;
};

namespace detail {

/// Kernel value as a function of the scaled distance r, divided by the output scale.
inline double correlation(KernelFamily family, double r2) {
    switch (family) {
    case KernelFamily::RBF:
        return std::exp(-0.5 * r2);
    case KernelFamily::Matern32: {
        const double a = std::sqrt(3.0 * r2);
        return (1.0 + a) * std::exp(-a);
    }
    case KernelFamily::Matern52: {
        const double a = std::sqrt(5.0 * r2);
        return (1.0 + a + 5.0 * r2 / 3.0) * std::exp(-a);
    }
    }
    return 0.0;
}

/// d correlation / d log(l_n) = factor(r) * (dx_n / l_n)^2.
inline double lengthscaleFactor(KernelFamily family, double r2) {
    switch (family) {
    case KernelFamily::RBF:
        return std::exp(-0.5 * r2);
    case KernelFamily::Matern32:
        return 3.0 * std::exp(-std::sqrt(3.0 * r2));
    case KernelFamily::Matern52: {
        const double a = std::sqrt(5.0 * r2);
        return (5.0 / 3.0) * (1.0 + a) * std::exp(-a);
    }
    }
    return 0.0;
}

}  // namespace detail

/// k(x, x') for the kernel family with r^2 = sum_n ((x_n - x'_n) / l_n)^2.
template <class DerivedA, class DerivedB>
double kernelEval(const KernelSpec& spec, const Eigen::MatrixBase<DerivedA>& x, const Eigen::MatrixBase<DerivedB>& y) {
    if (x.size() != spec.lengthscales.size() || y.size() != spec.lengthscales.size())
        fail(ErrorKind::Size, "kernel input dimension does not match the lengthscales");
    double r2 = 0.0;
    for (Index n = 0; n < x.size(); ++n) {
        const double t = (x(n) - y(n)) / spec.lengthscales(n);
        r2 += t * t;
    }
    return spec.outputScale * detail::correlation(spec.family, r2);
}

/// Cross-covariance between the rows of A and the rows of B.
MatrixXd kernelMatrix(const KernelSpec& spec, const MatrixXd& A, const MatrixXd& B);

void validate(const KernelSpec& spec);

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
    double stddev() const { return std::sqrt(variance); }
};

/// Exact zero-mean GP regression conditioned on (X, y) with a fixed kernel.
class GpModel {
public:
    GpModel() = default;

    /// Factorizes K + noise I; escalates the noise to 1e-8 then 1e-6 if the Cholesky
    /// factorization fails, and throws ConditioningError when all three fail.
    GpModel(KernelSpec kernel, MatrixXd X, VectorXd y, double noiseVariance = 1e-10);

    const KernelSpec& kernel() const { return kernel_; }
    double noiseVariance() const { return noise_; }
    /// Noise actually used after jitter escalation.
    double effectiveNoiseVariance() const { return effectiveNoise_; }
    bool jitterEscalated() const { return effectiveNoise_ > noise_; }
    const MatrixXd& inputs() const { return X_; }
    const VectorXd& outputs() const { return y_; }
    const VectorXd& weights() const { return alpha_; }
    MatrixXd choleskyFactor() const { return llt_.matrixL(); }
    Index size() const { return X_.rows(); }
    Index dims() const { return X_.cols(); }
    double logMarginalLikelihood() const { return lml_; }

    Prediction predict(const VectorXd& x) const;
    /// Means and variances at the rows of Xs.
    void predict(const MatrixXd& Xs, VectorXd& mean, VectorXd& variance) const;

    /// Same kernel, conditioned on one more observation.
    GpModel withObservation(const VectorXd& x, double y) const;

    nlohmann::json summary() const;

private:
    KernelSpec kernel_;
    double noise_ = 1e-10;
    double effectiveNoise_ = 1e-10;
    MatrixXd X_;
    VectorXd y_;
    Eigen::LLT<MatrixXd> llt_;
    VectorXd alpha_;
    double lml_ = 0.0;
};

/// Log marginal likelihood log p(y | X, theta). When `gradient` is given it receives the
/// derivative with respect to (log l_1, ..., log l_N, log outputScale).
double logMarginalLikelihood(const KernelSpec& spec, const MatrixXd& X, const VectorXd& y, double noiseVariance,
                             VectorXd* gradient = nullptr);

struct GpFitOptions {
    double noiseVariance = 1e-10;
    int starts = 8;
    std::uint64_t seed = 0;
    int maxIterations = 60;
    double minLengthscale = 1e-2;
    double maxLengthscale = 1e2;
    double minOutputScale = 1e-3;
    double maxOutputScale = 1e3;
};

/// Maximizes the log marginal likelihood over log-lengthscales and log output scale
/// (multi-start projected BFGS with analytic gradients) and conditions the model.
GpModel fitGp(const MatrixXd& X, const VectorXd& y, KernelFamily family, const GpFitOptions& opts = {});
/// Uses unit coordinates and transformed responses of the dataset.
GpModel fitGp(const Dataset& train, KernelFamily family, const GpFitOptions& opts = {});

}  // namespace dsopt
