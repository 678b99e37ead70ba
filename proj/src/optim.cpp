#include "dsopt/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dsopt::optim {

Result patternSearchMaximize(const Objective& f, VectorXd x0, const VectorXd& lower, const VectorXd& upper,
                             const PatternSearchOptions& opts) {
    const Index n = x0.size();
    const VectorXd range = upper - lower;
    Result r;
    r.x = clampToBox(x0, lower, upper);
    r.value = f(r.x);
    r.evaluations = 1;
    double step = opts.initialStep;
    for (int it = 0; it < opts.maxIterations && step >= opts.minStep; ++it) {
        r.iterations = it + 1;
        VectorXd bestX = r.x;
        double bestValue = r.value;
        for (Index d = 0; d < n; ++d) {
            if (range(d) <= 0.0) continue;
            for (double sign : {1.0, -1.0}) {
                VectorXd trial = r.x;
                trial(d) = std::clamp(trial(d) + sign * step * range(d), lower(d), upper(d));
                if (trial(d) == r.x(d)) continue;
                const double v = f(trial);
                ++r.evaluations;
                if (v > bestValue) {
                    bestValue = v;
                    bestX = trial;
                }
            }
        }
        if (bestValue > r.value) {
            r.x = bestX;
            r.value = bestValue;
        } else {
            step *= 0.5;
        }
    }
    return r;
}

namespace {

// Zeroes gradient components that would push a variable out through an active bound
// (for minimization of g, a component at the lower bound with positive gradient is free).
VectorXd projectedGradient(const VectorXd& x, const VectorXd& g, const VectorXd& lower, const VectorXd& upper) {
    VectorXd pg = g;
    for (Index i = 0; i < x.size(); ++i) {
        if (x(i) <= lower(i) && g(i) > 0.0) pg(i) = 0.0;
        if (x(i) >= upper(i) && g(i) < 0.0) pg(i) = 0.0;
    }
    return pg;
}

}  // namespace

Result boxedQuasiNewtonMaximize(const ObjectiveWithGradient& f, VectorXd x0, const VectorXd& lower,
                                const VectorXd& upper, const QuasiNewtonOptions& opts) {
    const Index n = x0.size();
    // Work on the minimization of -f.
    auto eval = [&](const VectorXd& x, VectorXd& g) {
        const double v = f(x, &g);
        g = -g;
        return -v;
    };

    Result r;
    VectorXd x = clampToBox(x0, lower, upper);
    VectorXd g(n);
    double fx = eval(x, g);
    r.evaluations = 1;
    MatrixXd H = MatrixXd::Identity(n, n);

    for (int it = 0; it < opts.maxIterations; ++it) {
        r.iterations = it + 1;
        VectorXd pg = projectedGradient(x, g, lower, upper);
        if (!std::isfinite(fx) || pg.lpNorm<Eigen::Infinity>() < opts.gradientTolerance) break;

        VectorXd d = -(H * pg);
        for (Index i = 0; i < n; ++i)
            if (pg(i) == 0.0) d(i) = 0.0;
        if (d.dot(pg) >= 0.0) {
            H.setIdentity();
            d = -pg;
        }

        double t = 1.0;
        VectorXd xNew;
        VectorXd gNew(n);
        double fNew = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            xNew = clampToBox(x + t * d, lower, upper);
            fNew = eval(xNew, gNew);
            ++r.evaluations;
            if (std::isfinite(fNew) && fNew <= fx + 1e-4 * pg.dot(xNew - x)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;

        const VectorXd s = xNew - x;
        const VectorXd y = gNew - g;
        const double sy = s.dot(y);
        const double change = std::abs(fNew - fx);
        x = xNew;
        g = gNew;
        const double fPrev = fx;
        fx = fNew;
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const MatrixXd I = MatrixXd::Identity(n, n);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
        }
        if (change <= opts.relativeTolerance * std::max(1.0, std::abs(fPrev))) break;
    }
    r.x = x;
    r.value = -fx;
    return r;
}

}  // namespace dsopt::optim
