#pragma once

#include "dsopt/core.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace dsopt {

enum class DesignCriterion { MaxPro, Maximin, PhiP, LhsOnly };

const char* name(DesignCriterion c);
DesignCriterion designCriterionFromName(const std::string& s);

/// Geometric cooling T_k = T0 * alpha^k. At each level, `proposalsPerPointDim * Q * N`
/// single-coordinate moves with Normal(0, initialStep * T_k / T0) steps are tried.
struct AnnealSchedule {
    double initialTemperature = 1e-3;
    double coolingRate = 0.95;
    int levels = 200;
    int proposalsPerPointDim = 50;
    double initialStep = 0.1;
};

nlohmann::json toJson(const AnnealSchedule& s);
AnnealSchedule annealScheduleFromJson(const nlohmann::json& j);

/// Q x N design in the open unit hypercube.
struct DesignMatrix {
    MatrixXd points;
    DesignCriterion criterion = DesignCriterion::LhsOnly;
    double criterionValue = 0.0;
    std::uint64_t seed = 0;

    Index size() const { return points.rows(); }
    Index dims() const { return points.cols(); }
};

/// Coordinate gaps below this are treated as coincident.
inline constexpr double kCoincidenceGap = 1e-12;

/// Minimum pairwise Euclidean distance over the rows of X.
template <class Derived>
double maximinValue(const Eigen::MatrixBase<Derived>& X) {
    if (X.rows() < 2) fail(ErrorKind::Size, "maximin criterion needs at least two points");
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < X.rows(); ++i)
        for (Index j = i + 1; j < X.rows(); ++j) best = std::min(best, (X.row(i) - X.row(j)).norm());
    return best;
}

/// (sum_{i<j} d_ij^-p)^(1/p).
template <class Derived>
double phiPValue(const Eigen::MatrixBase<Derived>& X, double p) {
    if (X.rows() < 2) fail(ErrorKind::Size, "phi_p criterion needs at least two points");
    if (!(p > 0.0)) fail(ErrorKind::Domain, "phi_p exponent must be positive");
    // Scale by the smallest distance so large p does not overflow.
    const double dmin = maximinValue(X);
    if (dmin <= 0.0) fail(ErrorKind::Criterion, "phi_p criterion is infinite for coincident points");
    double sum = 0.0;
    for (Index i = 0; i < X.rows(); ++i)
        for (Index j = i + 1; j < X.rows(); ++j) sum += std::pow(dmin / (X.row(i) - X.row(j)).norm(), p);
    return std::pow(sum, 1.0 / p) / dmin;
}

/// Log of the pair term prod_n (x_in - x_jn)^-2; +inf when any coordinate gap is below
/// kCoincidenceGap.
template <class DerivedA, class DerivedB>
double logMaxProPairTerm(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    double s = 0.0;
    for (Index n = 0; n < a.size(); ++n) {
        const double gap = std::abs(a(n) - b(n));
        if (gap < kCoincidenceGap) return std::numeric_limits<double>::infinity();
        s -= 2.0 * std::log(gap);
    }
    return s;
}

/// Log of the MaxPro criterion [ C(Q,2)^-1 sum_{i<j} prod_n (x_in - x_jn)^-2 ]^(1/N).
template <class Derived>
double logMaxProValue(const Eigen::MatrixBase<Derived>& X) {
    const Index Q = X.rows(), N = X.cols();
    if (Q < 2) fail(ErrorKind::Size, "MaxPro criterion needs at least two points");
    std::vector<double> logs;
    logs.reserve(static_cast<std::size_t>(Q * (Q - 1) / 2));
    double top = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < Q; ++i)
        for (Index j = i + 1; j < Q; ++j) {
            const double l = logMaxProPairTerm(X.row(i), X.row(j));
            if (!std::isfinite(l)) fail(ErrorKind::Criterion, "MaxPro criterion is infinite: coincident coordinate");
            logs.push_back(l);
            top = std::max(top, l);
        }
    double sum = 0.0;
    for (double l : logs) sum += std::exp(l - top);
    const double pairs = 0.5 * double(Q) * double(Q - 1);
    return (top + std::log(sum) - std::log(pairs)) / double(N);
}

template <class Derived>
double maxProValue(const Eigen::MatrixBase<Derived>& X) {
    return std::exp(logMaxProValue(X));
}

/// Latin hypercube with uniform jitter inside each stratum.
DesignMatrix lhsDesign(Index Q, Index N, std::uint64_t seed);

/// MaxPro design by simulated annealing from an LHS start; returns the best design seen.
DesignMatrix maxProDesign(Index Q, Index N, std::uint64_t seed, const AnnealSchedule& schedule = {});

/// Runs maxProDesign for every seed and keeps the lowest (criterion, seed).
DesignMatrix bestMaxProDesign(Index Q, Index N, const std::vector<std::uint64_t>& seeds,
                              const AnnealSchedule& schedule = {});

/// MaxPro criterion of X restricted to every coordinate subset of the given size.
std::map<std::vector<Index>, double> projectionQuality(const MatrixXd& X, Index subsetSize);

/// Halton points with a seeded Cranley-Patterson shift, strictly inside (0,1)^N.
MatrixXd haltonPoints(Index count, Index N, std::uint64_t seed);

/// CSV with a header of parameter names and one row per point.
void writeDesignCsv(const DesignMatrix& d, const std::vector<std::string>& names, const std::string& path);
MatrixXd readDesignCsv(const std::string& path, std::vector<std::string>* names = nullptr);
nlohmann::json designSidecar(const DesignMatrix& d, const AnnealSchedule& schedule);

}  // namespace dsopt
