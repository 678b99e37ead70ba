#include "dsopt/gp.hpp"

#include "dsopt/optim.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace dsopt {

const char* name(KernelFamily k) {
    switch (k) {
    case KernelFamily::RBF:
        return "RBF";
    case KernelFamily::Matern32:
        return "Matern32";
    case KernelFamily::Matern52:
        return "Matern52";
    }
    return "RBF";
}

KernelFamily kernelFamilyFromName(const std::string& s) {
    for (auto k : {KernelFamily::RBF, KernelFamily::Matern32, KernelFamily::Matern52})
        if (s == name(k)) return k;
    fail(ErrorKind::Config, "unknown kernel family '" + s + "'");
}

void validate(const KernelSpec& spec) {
    if (spec.lengthscales.size() == 0) fail(ErrorKind::Size, "kernel needs at least one lengthscale");
    if (!(spec.lengthscales.array() > 0.0).all()) fail(ErrorKind::Domain, "lengthscales must be positive");
    if (!(spec.outputScale > 0.0)) fail(ErrorKind::Domain, "output scale must be positive");
}

namespace {

// Squared scaled distances between the rows of A and B.
MatrixXd scaledSquaredDistances(const VectorXd& lengthscales, const MatrixXd& A, const MatrixXd& B) {
    if (A.cols() != lengthscales.size() || B.cols() != lengthscales.size())
        fail(ErrorKind::Size, "kernel input dimension does not match the lengthscales");
    const VectorXd inv = lengthscales.cwiseInverse();
    const MatrixXd As = A * inv.asDiagonal();
    const MatrixXd Bs = B * inv.asDiagonal();
    MatrixXd R2 = (-2.0 * As * Bs.transpose()).eval();
    R2.colwise() += As.rowwise().squaredNorm();
    R2.rowwise() += Bs.rowwise().squaredNorm().transpose();
    return R2.cwiseMax(0.0);
}

constexpr double kJitterLadder[] = {1e-8, 1e-6};

double conditionEstimate(const MatrixXd& K) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(K, Eigen::EigenvaluesOnly);
    const double hi = es.eigenvalues().maxCoeff();
    const double lo = es.eigenvalues().minCoeff();
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

// Cholesky of K + noise I, escalating the noise along the jitter ladder. Returns the noise
// that worked, or a negative value when every level failed.
double factorize(const MatrixXd& K, double noise, Eigen::LLT<MatrixXd>& llt) {
    auto attempt = [&](double v) {
        MatrixXd A = K;
        A.diagonal().array() += v;
        llt.compute(A);
        return llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > 0.0).all();
    };
    if (attempt(noise)) return noise;
    for (double v : kJitterLadder)
        if (v > noise && attempt(v)) return v;
    return -1.0;
}

}  // namespace

MatrixXd kernelMatrix(const KernelSpec& spec, const MatrixXd& A, const MatrixXd& B) {
    MatrixXd R2 = scaledSquaredDistances(spec.lengthscales, A, B);
    return R2.unaryExpr([&](double r2) { return spec.outputScale * detail::correlation(spec.family, r2); });
}

GpModel::GpModel(KernelSpec kernel, MatrixXd X, VectorXd y, double noiseVariance)
    : kernel_(std::move(kernel)), noise_(noiseVariance), X_(std::move(X)), y_(std::move(y)) {
    validate(kernel_);
    if (X_.rows() < 1) fail(ErrorKind::Data, "GP needs at least one training point");
    if (X_.rows() != y_.size()) fail(ErrorKind::Size, "GP inputs and outputs differ in length");
    if (X_.cols() != kernel_.lengthscales.size()) fail(ErrorKind::Size, "GP input dimension does not match the kernel");
    const MatrixXd K = kernelMatrix(kernel_, X_, X_);
    effectiveNoise_ = factorize(K, noise_, llt_);
    if (effectiveNoise_ < 0.0) {
        MatrixXd A = K;
        A.diagonal().array() += kJitterLadder[1];
        const double cond = conditionEstimate(A);
        throw ConditioningError("GP covariance is not positive definite after jitter escalation (condition estimate " +
                                    std::to_string(cond) + ")",
                                cond);
    }
    alpha_ = llt_.solve(y_);
    const double logDet = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
    lml_ = -0.5 * y_.dot(alpha_) - 0.5 * logDet - 0.5 * double(y_.size()) * std::log(2.0 * M_PI);
}

Prediction GpModel::predict(const VectorXd& x) const {
    VectorXd mean, var;
    predict(MatrixXd(x.transpose()), mean, var);
    return {mean(0), var(0)};
}

void GpModel::predict(const MatrixXd& Xs, VectorXd& mean, VectorXd& variance) const {
    const MatrixXd Ks = kernelMatrix(kernel_, X_, Xs);
    mean = Ks.transpose() * alpha_;
    const MatrixXd V = llt_.matrixL().solve(Ks);
    variance = (kernel_.outputScale - V.colwise().squaredNorm().transpose().array()).cwiseMax(0.0).matrix();
}

GpModel GpModel::withObservation(const VectorXd& x, double y) const {
    MatrixXd X(X_.rows() + 1, X_.cols());
    X << X_, x.transpose();
    VectorXd yy(y_.size() + 1);
    yy << y_, y;
    return GpModel(kernel_, std::move(X), std::move(yy), noise_);
}

nlohmann::json GpModel::summary() const {
    return {{"family", name(kernel_.family)},
            {"lengthscales", std::vector<double>(kernel_.lengthscales.data(),
                                                 kernel_.lengthscales.data() + kernel_.lengthscales.size())},
            {"outputScale", kernel_.outputScale},
            {"noiseVariance", noise_},
            {"effectiveNoiseVariance", effectiveNoise_},
            {"logMarginalLikelihood", lml_},
            {"trainingSize", size()}};
}

double logMarginalLikelihood(const KernelSpec& spec, const MatrixXd& X, const VectorXd& y, double noiseVariance,
                             VectorXd* gradient) {
    const Index Q = X.rows(), N = X.cols();
    const MatrixXd R2 = scaledSquaredDistances(spec.lengthscales, X, X);
    const MatrixXd C = R2.unaryExpr([&](double r2) { return detail::correlation(spec.family, r2); });
    Eigen::LLT<MatrixXd> llt;
    if (factorize(spec.outputScale * C, noiseVariance, llt) < 0.0) {
        if (gradient) gradient->setZero(N + 1);
        return -std::numeric_limits<double>::infinity();
    }
    const VectorXd alpha = llt.solve(y);
    const double logDet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double value = -0.5 * y.dot(alpha) - 0.5 * logDet - 0.5 * double(Q) * std::log(2.0 * M_PI);
    if (gradient) {
        MatrixXd W = alpha * alpha.transpose() - llt.solve(MatrixXd::Identity(Q, Q));
        gradient->resize(N + 1);
        // dK/dlog s = s C;  dK/dlog l_n = s F(r) (dx_n / l_n)^2.
        (*gradient)(N) = 0.5 * spec.outputScale * W.cwiseProduct(C).sum();
        const MatrixXd WF =
            W.cwiseProduct(R2.unaryExpr([&](double r2) { return detail::lengthscaleFactor(spec.family, r2); }));
        // sum_ij WF_ij (x_i - x_j)^2 = 2 x^2 . rowsum(WF) - 2 x' WF x, WF symmetric.
        const VectorXd rowSums = WF.rowwise().sum();
        for (Index n = 0; n < N; ++n) {
            const VectorXd xs = X.col(n) / spec.lengthscales(n);
            const double acc = 2.0 * xs.cwiseAbs2().dot(rowSums) - 2.0 * xs.dot(WF * xs);
            (*gradient)(n) = 0.5 * spec.outputScale * acc;
        }
    }
    return value;
}

GpModel fitGp(const MatrixXd& X, const VectorXd& y, KernelFamily family, const GpFitOptions& opts) {
    const Index Q = X.rows(), N = X.cols();
    if (Q < 2) fail(ErrorKind::Data, "GP training needs at least two points");
    if (y.size() != Q) fail(ErrorKind::Size, "GP inputs and outputs differ in length");
    if (opts.starts < 1) fail(ErrorKind::Config, "GP training needs at least one start");

    VectorXd lower(N + 1), upper(N + 1);
    lower.head(N).setConstant(std::log(opts.minLengthscale));
    upper.head(N).setConstant(std::log(opts.maxLengthscale));
    lower(N) = std::log(opts.minOutputScale);
    upper(N) = std::log(opts.maxOutputScale);

    auto specFor = [&](const VectorXd& theta) {
        KernelSpec s;
        s.family = family;
        s.lengthscales = theta.head(N).array().exp();
        s.outputScale = std::exp(theta(N));
        return s;
    };
    auto objective = [&](const VectorXd& theta, VectorXd* grad) {
        return logMarginalLikelihood(specFor(theta), X, y, opts.noiseVariance, grad);
    };

    const double scale0 = std::clamp(y.squaredNorm() / double(Q), opts.minOutputScale, opts.maxOutputScale);
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> logL(std::log(0.05), std::log(5.0));
    std::uniform_real_distribution<double> logS(-1.0, 1.0);

    optim::QuasiNewtonOptions qn;
    qn.maxIterations = opts.maxIterations;
    VectorXd bestTheta;
    double bestValue = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < opts.starts; ++s) {
        VectorXd theta0(N + 1);
        if (s == 0) {
            theta0.head(N).setConstant(std::log(0.5));
            theta0(N) = std::log(scale0);
        } else {
            for (Index n = 0; n < N; ++n) theta0(n) = logL(rng);
            theta0(N) = std::log(scale0) + logS(rng);
        }
        theta0 = optim::clampToBox(theta0, lower, upper);
        const auto r = optim::boxedQuasiNewtonMaximize(objective, theta0, lower, upper, qn);
        if (std::isfinite(r.value) && r.value > bestValue) {
            bestValue = r.value;
            bestTheta = r.x;
        }
    }
    if (bestTheta.size() == 0) {
        MatrixXd K = kernelMatrix(specFor(VectorXd::Zero(N + 1)), X, X);
        K.diagonal().array() += kJitterLadder[1];
        const double cond = conditionEstimate(K);
        throw ConditioningError("GP training failed: covariance singular at every start", cond);
    }
    return GpModel(specFor(bestTheta), X, y, opts.noiseVariance);
}

GpModel fitGp(const Dataset& train, KernelFamily family, const GpFitOptions& opts) {
    return fitGp(train.unitMatrix(), train.transformedResponses(), family, opts);
}

}  // namespace dsopt
