#pragma once

#include "dsopt/core.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace dsopt {

/// Polynomial degree per input dimension.
using MultiIndex = std::vector<int>;

int totalDegree(const MultiIndex& a);
/// Graded-lexicographic order: total degree first, then reverse-lex so (1,0) precedes (0,1).
bool gradedLexLess(const MultiIndex& a, const MultiIndex& b);

enum class BasisScheme { TD1, TD2, TD, LAR, SAPCE };

const char* name(BasisScheme s);
BasisScheme basisSchemeFromName(const std::string& s);

struct BasisSet {
    std::vector<MultiIndex> indices;
    BasisScheme scheme = BasisScheme::TD;

    Index size() const { return Index(indices.size()); }
    Index dims() const { return indices.empty() ? 0 : Index(indices.front().size()); }
    int maxDegree() const;
    bool contains(const MultiIndex& a) const;
};

/// Shifted Legendre polynomial of the given degree, orthonormal on U(0,1): sqrt(2k+1) P_k(2u-1).
double orthonormalPoly1d(int degree, double u);

/// Q x P regression matrix Psi_qp = Psi_{alpha_p}(u_q).
MatrixXd regressionMatrix(const BasisSet& basis, const MatrixXd& U);

/// All multi-indices with |alpha| <= alphaMax in graded-lexicographic order.
BasisSet buildTotalDegreeBasis(Index N, int alphaMax);

struct PceDiagnostics {
    double residualNorm = 0.0;
    /// Corrected leave-one-out error relative to the sample variance of the outputs.
    double looError = 0.0;
    double conditionEstimate = 1.0;
    Index trainingSize = 0;
    bool oversamplingWarning = false;
};

struct PceModel {
    BasisSet basis;
    VectorXd coefficients;
    PceDiagnostics diagnostics;

    double operator()(const VectorXd& u) const;
};

double evaluatePce(const PceModel& model, const VectorXd& u);
VectorXd evaluatePceRows(const PceModel& model, const MatrixXd& U);

/// Least squares via column-pivoted QR. Throws Size when Q < P and ConditioningError when
/// the regression matrix is rank deficient. Sets the oversampling warning when Q < 2P.
PceModel fitPceLeastSquares(const MatrixXd& U, const VectorXd& z, const BasisSet& basis);
/// Uses unit coordinates and transformed responses of the dataset.
PceModel fitPceLeastSquares(const Dataset& train, const BasisSet& basis);

/// Corrected leave-one-out error of an OLS fit with the given basis (infinity if Q <= P).
double correctedLooError(const MatrixXd& U, const VectorXd& z, const BasisSet& basis);

/// Least angle regression over the candidate basis; the constant term is always kept.
/// Each path step is refitted by OLS and the step with the smallest corrected LOO error
/// wins, ties going to fewer terms. `path`, when given, receives the basis of every step.
BasisSet buildLarBasis(const MatrixXd& U, const VectorXd& z, const BasisSet& candidates, Index maxTerms,
                       std::vector<BasisSet>* path = nullptr);

/// Sensitivity-adaptive basis growth from TD1. Each iteration scores the forward neighbours
/// alpha + e_n (|.| <= alphaCap) of the current basis by the smallest partial total variance
/// among their active dimensions, admits up to three with score >= 1% of the best, and stops
/// at budgetTerms or when the corrected LOO error no longer improves.
BasisSet buildSapceBasis(const MatrixXd& U, const VectorXd& z, int alphaCap, Index budgetTerms);

nlohmann::json toJson(const PceModel& model, const nlohmann::json& inputModel = nullptr);
PceModel pceModelFromJson(const nlohmann::json& j);

}  // namespace dsopt
