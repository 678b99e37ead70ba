#pragma once

#include "dsopt/core.hpp"

#include <array>
#include <string>

namespace dsopt {

/// Sample (n-1) standard deviation over mean. Throws Domain for a zero mean.
double coefficientOfVariation(const VectorXd& window);

/// True when the CoV over the last `window` values is below `tolerance`
/// (false while fewer values are available).
bool iterativelyConverged(const VectorXd& history, Index window = 25, double tolerance = 1e-5);

/// Three systematically refined meshes, coarse to fine.
struct MeshStudy {
    std::array<double, 3> cellCounts{0.0, 0.0, 0.0};
    std::array<double, 3> solutions{0.0, 0.0, 0.0};
    double r2 = 1.0;
    double r3 = 1.0;

    /// r_i = (N_i / N_{i-1})^(1/3).
    static MeshStudy fromCellCounts(const std::array<double, 3>& cells, const std::array<double, 3>& solutions);
    static MeshStudy fromRefinement(double r2, double r3, const std::array<double, 3>& solutions);
};

/// p = ln((eta2 - eta1) / (eta3 - eta2)) / ln(r3). Throws Data on non-monotone convergence.
double observedOrder(const MeshStudy& s);

/// eta_ex = eta3 + (eta3 - eta2) / (r3^p - 1).
double richardsonExtrapolate(const MeshStudy& s, double p);

/// Relative discretization errors (fractions) and GCI = 1.25 e, indexed by mesh.
struct DiscretizationErrors {
    std::array<double, 3> e{0.0, 0.0, 0.0};
    std::array<double, 3> gci{0.0, 0.0, 0.0};
};

/// e_i = (eta_i - eta_{i-1}) / (eta_i (r_i^p - 1)) for meshes 2 and 3; e_1 = r2^p e_2.
DiscretizationErrors discretizationErrors(const MeshStudy& s, double p);

/// Reads "cells,solution" rows (header optional) for three meshes.
MeshStudy readMeshStudyCsv(const std::string& path);

/// Mean and maximum absolute percentage errors. Throws Domain on a zero actual value.
double mape(const VectorXd& actual, const VectorXd& predicted);
double maxApe(const VectorXd& actual, const VectorXd& predicted);

}  // namespace dsopt
