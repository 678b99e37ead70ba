#include "dsopt/pce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace dsopt {

int totalDegree(const MultiIndex& a) {
    int s = 0;
    for (int d : a) s += d;
    return s;
}

bool gradedLexLess(const MultiIndex& a, const MultiIndex& b) {
    const int da = totalDegree(a), db = totalDegree(b);
    if (da != db) return da < db;
    return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

const char* name(BasisScheme s) {
    switch (s) {
    case BasisScheme::TD1:
        return "TD1";
    case BasisScheme::TD2:
        return "TD2";
    case BasisScheme::TD:
        return "TD";
    case BasisScheme::LAR:
        return "LAR";
    case BasisScheme::SAPCE:
        return "SAPCE";
    }
    return "TD";
}

BasisScheme basisSchemeFromName(const std::string& s) {
    for (auto b : {BasisScheme::TD1, BasisScheme::TD2, BasisScheme::TD, BasisScheme::LAR, BasisScheme::SAPCE})
        if (s == name(b)) return b;
    fail(ErrorKind::Config, "unknown basis scheme '" + s + "'");
}

int BasisSet::maxDegree() const {
    int m = 0;
    for (const auto& a : indices)
        for (int d : a) m = std::max(m, d);
    return m;
}

bool BasisSet::contains(const MultiIndex& a) const {
    return std::find(indices.begin(), indices.end(), a) != indices.end();
}

double orthonormalPoly1d(int degree, double u) {
    if (degree < 0) fail(ErrorKind::Domain, "polynomial degree must be nonnegative");
    const double x = 2.0 * u - 1.0;
    double p0 = 1.0, p1 = x;
    if (degree == 0) return 1.0;
    for (int k = 1; k < degree; ++k) {
        const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return std::sqrt(2.0 * degree + 1.0) * p1;
}

namespace {

// table[n](q, k) = orthonormal polynomial of degree k in dimension n at sample q.
std::vector<MatrixXd> polynomialTables(const MatrixXd& U, int maxDegree) {
    std::vector<MatrixXd> tables(static_cast<std::size_t>(U.cols()));
    for (Index n = 0; n < U.cols(); ++n) {
        MatrixXd& T = tables[std::size_t(n)];
        T.resize(U.rows(), maxDegree + 1);
        for (Index q = 0; q < U.rows(); ++q) {
            const double x = 2.0 * U(q, n) - 1.0;
            double p0 = 1.0, p1 = x;
            T(q, 0) = 1.0;
            if (maxDegree >= 1) T(q, 1) = std::sqrt(3.0) * x;
            for (int k = 1; k < maxDegree; ++k) {
                const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
                T(q, k + 1) = std::sqrt(2.0 * k + 3.0) * p2;
            }
        }
    }
    return tables;
}

double sampleVariance(const VectorXd& z) {
    if (z.size() < 2) return 0.0;
    return (z.array() - z.mean()).square().sum() / double(z.size() - 1);
}

struct OlsFit {
    VectorXd coefficients;
    double residualNorm = 0.0;
    double looError = std::numeric_limits<double>::infinity();
    double condition = 1.0;
    Index rank = 0;
};

OlsFit ols(const MatrixXd& Psi, const VectorXd& z) {
    const Index Q = Psi.rows(), P = Psi.cols();
    OlsFit f;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Psi);
    qr.setThreshold(1e-12);
    f.rank = qr.rank();
    const VectorXd rdiag = qr.matrixQR().diagonal().cwiseAbs();
    f.condition = rdiag.minCoeff() > 0.0 ? rdiag.maxCoeff() / rdiag.minCoeff() : std::numeric_limits<double>::infinity();
    if (f.rank < P) return f;
    f.coefficients = qr.solve(z);
    const VectorXd residual = z - Psi * f.coefficients;
    f.residualNorm = residual.norm();
    if (Q <= P) return f;
    const MatrixXd Qthin = qr.householderQ() * MatrixXd::Identity(Q, P);
    const VectorXd h = Qthin.rowwise().squaredNorm();
    const MatrixXd Rinv = qr.matrixR()
                              .topLeftCorner(P, P)
                              .template triangularView<Eigen::Upper>()
                              .solve(MatrixXd::Identity(P, P));
    // Corrected LOO: mean((r_i / (1 - h_i))^2) * Q/(Q-P) * (1 + tr(C^-1)/Q), C = Psi'Psi / Q.
    double sum = 0.0;
    for (Index q = 0; q < Q; ++q) {
        const double denom = 1.0 - h(q);
        if (denom <= 1e-12) return f;
        sum += std::pow(residual(q) / denom, 2);
    }
    const double traceCinv = double(Q) * Rinv.squaredNorm();
    const double correction = double(Q) / double(Q - P) * (1.0 + traceCinv / double(Q));
    const double var = sampleVariance(z);
    const double raw = sum / double(Q) * correction;
    f.looError = var > 0.0 ? raw / var : raw;
    return f;
}

// LOO values are relative to the output variance; differences below kLooFloor are ties.
constexpr double kLooFloor = 1e-12;

bool improves(double loo, double best, double relative) { return loo < best * (1.0 - relative) - kLooFloor; }

BasisSet withScheme(std::vector<MultiIndex> indices, BasisScheme scheme) {
    std::sort(indices.begin(), indices.end(), gradedLexLess);
    return BasisSet{std::move(indices), scheme};
}

}  // namespace

MatrixXd regressionMatrix(const BasisSet& basis, const MatrixXd& U) {
    if (basis.size() == 0) fail(ErrorKind::Size, "empty basis");
    if (U.cols() != basis.dims()) fail(ErrorKind::Size, "input dimension does not match the basis");
    const auto tables = polynomialTables(U, basis.maxDegree());
    MatrixXd Psi = MatrixXd::Ones(U.rows(), basis.size());
    for (Index p = 0; p < basis.size(); ++p) {
        const auto& a = basis.indices[std::size_t(p)];
        for (Index n = 0; n < U.cols(); ++n)
            if (a[std::size_t(n)] > 0) Psi.col(p).array() *= tables[std::size_t(n)].col(a[std::size_t(n)]).array();
    }
    return Psi;
}

BasisSet buildTotalDegreeBasis(Index N, int alphaMax) {
    if (N < 1) fail(ErrorKind::Size, "basis needs at least one dimension");
    if (alphaMax < 0) fail(ErrorKind::Domain, "total degree must be nonnegative");
    std::vector<MultiIndex> out;
    MultiIndex cur(static_cast<std::size_t>(N), 0);
    auto rec = [&](auto&& self, Index n, int remaining) -> void {
        if (n == N) {
            out.push_back(cur);
            return;
        }
        for (int d = 0; d <= remaining; ++d) {
            cur[std::size_t(n)] = d;
            self(self, n + 1, remaining - d);
        }
        cur[std::size_t(n)] = 0;
    };
    rec(rec, 0, alphaMax);
    const BasisScheme scheme = alphaMax == 1 ? BasisScheme::TD1 : alphaMax == 2 ? BasisScheme::TD2 : BasisScheme::TD;
    return withScheme(std::move(out), scheme);
}

double PceModel::operator()(const VectorXd& u) const { return evaluatePce(*this, u); }

double evaluatePce(const PceModel& model, const VectorXd& u) {
    return evaluatePceRows(model, MatrixXd(u.transpose()))(0);
}

VectorXd evaluatePceRows(const PceModel& model, const MatrixXd& U) {
    return regressionMatrix(model.basis, U) * model.coefficients;
}

PceModel fitPceLeastSquares(const MatrixXd& U, const VectorXd& z, const BasisSet& basis) {
    if (U.rows() != z.size()) fail(ErrorKind::Size, "PCE inputs and outputs differ in length");
    if (U.rows() < basis.size())
        fail(ErrorKind::Size, "underdetermined PCE regression: " + std::to_string(U.rows()) + " samples for " +
                                  std::to_string(basis.size()) + " basis terms");
    const MatrixXd Psi = regressionMatrix(basis, U);
    const OlsFit f = ols(Psi, z);
    if (f.rank < basis.size())
        throw ConditioningError("rank-deficient PCE regression matrix (rank " + std::to_string(f.rank) + " of " +
                                    std::to_string(basis.size()) + ")",
                                f.condition);
    PceModel m;
    m.basis = basis;
    m.coefficients = f.coefficients;
    m.diagnostics.residualNorm = f.residualNorm;
    m.diagnostics.looError = f.looError;
    m.diagnostics.conditionEstimate = f.condition;
    m.diagnostics.trainingSize = U.rows();
    m.diagnostics.oversamplingWarning = U.rows() < 2 * basis.size();
    return m;
}

PceModel fitPceLeastSquares(const Dataset& train, const BasisSet& basis) {
    return fitPceLeastSquares(train.unitMatrix(), train.transformedResponses(), basis);
}

double correctedLooError(const MatrixXd& U, const VectorXd& z, const BasisSet& basis) {
    if (U.rows() <= basis.size()) return std::numeric_limits<double>::infinity();
    const OlsFit f = ols(regressionMatrix(basis, U), z);
    return f.rank < basis.size() ? std::numeric_limits<double>::infinity() : f.looError;
}

BasisSet buildLarBasis(const MatrixXd& U, const VectorXd& z, const BasisSet& candidates, Index maxTerms,
                       std::vector<BasisSet>* path) {
    if (U.rows() != z.size()) fail(ErrorKind::Size, "PCE inputs and outputs differ in length");
    if (maxTerms < 1) fail(ErrorKind::Config, "LAR needs room for at least the constant term");
    const Index Q = U.rows(), N = candidates.dims();
    const MultiIndex zero(static_cast<std::size_t>(N), 0);

    std::vector<MultiIndex> pool;
    for (const auto& a : candidates.indices)
        if (a != zero) pool.push_back(a);
    BasisSet pooled{pool, candidates.scheme};

    // Centred, unit-norm regressors; the constant is carried separately.
    MatrixXd X = pool.empty() ? MatrixXd(Q, 0) : regressionMatrix(pooled, U);
    VectorXd norms(X.cols());
    for (Index j = 0; j < X.cols(); ++j) {
        X.col(j).array() -= X.col(j).mean();
        norms(j) = X.col(j).norm();
        if (norms(j) > 0.0) X.col(j) /= norms(j);
    }
    VectorXd residual = z.array() - z.mean();

    std::vector<Index> active;
    std::vector<bool> inActive(static_cast<std::size_t>(X.cols()), false);
    auto basisFor = [&](const std::vector<Index>& act) {
        std::vector<MultiIndex> idx{zero};
        for (Index j : act) idx.push_back(pool[std::size_t(j)]);
        return withScheme(std::move(idx), BasisScheme::LAR);
    };

    BasisSet best = basisFor(active);
    double bestLoo = correctedLooError(U, z, best);
    if (path) path->assign(1, best);

    const Index maxActive = std::min({maxTerms - 1, X.cols(), Q - 2});
    Index next = -1;
    while (Index(active.size()) < maxActive) {
        const VectorXd c = X.transpose() * residual;
        if (active.empty()) {
            double top = -1.0;
            for (Index j = 0; j < X.cols(); ++j)
                if (norms(j) > 0.0 && std::abs(c(j)) > top) {
                    top = std::abs(c(j));
                    next = j;
                }
            if (next < 0 || top <= 1e-14 * z.norm()) break;
        }
        active.push_back(next);
        inActive[std::size_t(next)] = true;

        const BasisSet current = basisFor(active);
        const double loo = correctedLooError(U, z, current);
        if (path) path->push_back(current);
        if (improves(loo, bestLoo, 0.0)) {
            bestLoo = loo;
            best = current;
        }
        if (Index(active.size()) >= maxActive) break;

        // Equiangular direction over the active set.
        const Index k = Index(active.size());
        MatrixXd XA(Q, k);
        VectorXd s(k);
        for (Index i = 0; i < k; ++i) {
            const Index j = active[std::size_t(i)];
            s(i) = c(j) >= 0.0 ? 1.0 : -1.0;
            XA.col(i) = s(i) * X.col(j);
        }
        const MatrixXd G = XA.transpose() * XA;
        Eigen::LDLT<MatrixXd> ldlt(G);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
        const VectorXd Ginv1 = ldlt.solve(VectorXd::Ones(k));
        const double oneGinv1 = Ginv1.sum();
        if (!(oneGinv1 > 0.0)) break;
        const double AA = 1.0 / std::sqrt(oneGinv1);
        const VectorXd u = XA * (AA * Ginv1);
        const VectorXd a = X.transpose() * u;
        const double C = std::abs(c(active.front()));

        double gamma = std::numeric_limits<double>::infinity();
        next = -1;
        for (Index j = 0; j < X.cols(); ++j) {
            if (inActive[std::size_t(j)] || norms(j) <= 0.0) continue;
            for (double g : {(C - c(j)) / (AA - a(j)), (C + c(j)) / (AA + a(j))})
                if (g > 1e-15 && g < gamma) {
                    gamma = g;
                    next = j;
                }
        }
        if (next < 0) break;
        residual -= gamma * u;
    }
    return best;
}

BasisSet buildSapceBasis(const MatrixXd& U, const VectorXd& z, int alphaCap, Index budgetTerms) {
    const Index Q = U.rows(), N = U.cols();
    if (U.rows() != z.size()) fail(ErrorKind::Size, "PCE inputs and outputs differ in length");
    if (Q < N + 2) fail(ErrorKind::Data, "SAPCE needs at least N + 2 samples");
    if (alphaCap < 1) fail(ErrorKind::Config, "SAPCE degree cap must be at least 1");

    BasisSet current = buildTotalDegreeBasis(N, 1);
    current.scheme = BasisScheme::SAPCE;
    PceModel fit = fitPceLeastSquares(U, z, current);
    BasisSet best = current;
    double bestLoo = fit.diagnostics.looError;

    const Index limit = std::min(budgetTerms, Q - 1);
    while (current.size() < limit) {
        VectorXd partial = VectorXd::Zero(N);
        for (Index p = 0; p < current.size(); ++p)
            for (Index n = 0; n < N; ++n)
                if (current.indices[std::size_t(p)][std::size_t(n)] > 0)
                    partial(n) += fit.coefficients(p) * fit.coefficients(p);

        std::set<MultiIndex, decltype(&gradedLexLess)> candidates(&gradedLexLess);
        for (const auto& a : current.indices) {
            if (totalDegree(a) >= alphaCap) continue;
            for (Index n = 0; n < N; ++n) {
                MultiIndex b = a;
                ++b[std::size_t(n)];
                if (!current.contains(b)) candidates.insert(b);
            }
        }
        if (candidates.empty()) break;

        std::vector<std::pair<double, MultiIndex>> scored;
        for (const auto& b : candidates) {
            double score = std::numeric_limits<double>::infinity();
            for (Index n = 0; n < N; ++n)
                if (b[std::size_t(n)] > 0) score = std::min(score, partial(n));
            scored.emplace_back(score, b);
        }
        std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) { return x.first > y.first; });

        Index admitted = 0;
        for (const auto& entry : scored) {
            if (admitted >= 3 || current.size() >= limit) break;
            std::vector<MultiIndex> next = current.indices;
            next.push_back(entry.second);
            BasisSet grown = withScheme(std::move(next), BasisScheme::SAPCE);
            PceModel grownFit;
            try {
                grownFit = fitPceLeastSquares(U, z, grown);
            } catch (const ConditioningError&) {
                continue;
            }
            if (!improves(grownFit.diagnostics.looError, bestLoo, 1e-3)) continue;
            bestLoo = grownFit.diagnostics.looError;
            current = std::move(grown);
            fit = std::move(grownFit);
            ++admitted;
        }
        if (admitted == 0) break;
        best = current;
    }
    return best;
}

nlohmann::json toJson(const PceModel& model, const nlohmann::json& inputModel) {
    nlohmann::json j;
    j["scheme"] = name(model.basis.scheme);
    j["indices"] = model.basis.indices;
    j["coefficients"] = std::vector<double>(model.coefficients.data(), model.coefficients.data() + model.coefficients.size());
    j["inputModel"] = inputModel;
    j["diagnostics"] = {{"residualNorm", model.diagnostics.residualNorm},
                        {"looError", std::isfinite(model.diagnostics.looError) ? nlohmann::json(model.diagnostics.looError)
                                                                                : nlohmann::json(nullptr)},
                        {"conditionEstimate", model.diagnostics.conditionEstimate},
                        {"trainingSize", model.diagnostics.trainingSize},
                        {"oversamplingWarning", model.diagnostics.oversamplingWarning}};
    return j;
}

PceModel pceModelFromJson(const nlohmann::json& j) {
    PceModel m;
    m.basis.scheme = basisSchemeFromName(j.at("scheme").get<std::string>());
    m.basis.indices = j.at("indices").get<std::vector<MultiIndex>>();
    const auto c = j.at("coefficients").get<std::vector<double>>();
    if (c.size() != m.basis.indices.size()) fail(ErrorKind::Io, "PCE coefficient count does not match the basis");
    m.coefficients = Eigen::Map<const VectorXd>(c.data(), Index(c.size()));
    if (j.contains("diagnostics")) {
        const auto& d = j["diagnostics"];
        m.diagnostics.residualNorm = d.value("residualNorm", 0.0);
        m.diagnostics.looError = d.contains("looError") && d["looError"].is_number()
                                     ? d["looError"].get<double>()
                                     : std::numeric_limits<double>::infinity();
        m.diagnostics.conditionEstimate = d.value("conditionEstimate", 1.0);
        m.diagnostics.trainingSize = d.value("trainingSize", Index{0});
        m.diagnostics.oversamplingWarning = d.value("oversamplingWarning", false);
    }
    return m;
}

}  // namespace dsopt
