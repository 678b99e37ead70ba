#pragma once

#include "dsopt/core.hpp"

#include <functional>

namespace dsopt::optim {

using Objective = std::function<double(const VectorXd&)>;
/// Returns the value and, when `grad` is non-null, writes the gradient into it.
using ObjectiveWithGradient = std::function<double(const VectorXd&, VectorXd* grad)>;

struct Result {
    VectorXd x;
    double value = 0.0;
    int iterations = 0;
    int evaluations = 0;
};

struct PatternSearchOptions {
    double initialStep = 0.25;  ///< fraction of each box side
    double minStep = 1e-7;      ///< fraction of each box side
    int maxIterations = 200;
};

/// Compass search maximizing `f` inside the box [lower, upper].
/// Each iteration polls +/- step along every coordinate and moves to the best
/// improving poll point; the step is halved when no poll point improves.
Result patternSearchMaximize(const Objective& f, VectorXd x0, const VectorXd& lower, const VectorXd& upper,
                             const PatternSearchOptions& opts = {});

struct QuasiNewtonOptions {
    int maxIterations = 100;
    double gradientTolerance = 1e-6;
    double relativeTolerance = 1e-10;
};

/// Projected BFGS with Armijo backtracking, maximizing `f` inside a box.
Result boxedQuasiNewtonMaximize(const ObjectiveWithGradient& f, VectorXd x0, const VectorXd& lower,
                                const VectorXd& upper, const QuasiNewtonOptions& opts = {});

inline VectorXd clampToBox(const VectorXd& x, const VectorXd& lower, const VectorXd& upper) {
    return x.cwiseMax(lower).cwiseMin(upper);
}

}  // namespace dsopt::optim
