#include "dsopt/verification.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace dsopt {

double coefficientOfVariation(const VectorXd& window) {
    if (window.size() < 2) fail(ErrorKind::Size, "CoV needs at least two values");
    const double mean = window.mean();
    if (mean == 0.0) fail(ErrorKind::Domain, "CoV undefined for a zero mean");
    const double var = (window.array() - mean).square().sum() / double(window.size() - 1);
    return std::sqrt(var) / mean;
}

bool iterativelyConverged(const VectorXd& history, Index window, double tolerance) {
    if (history.size() < window) return false;
    return std::abs(coefficientOfVariation(history.tail(window))) < tolerance;
}

MeshStudy MeshStudy::fromCellCounts(const std::array<double, 3>& cells, const std::array<double, 3>& solutions) {
    for (double c : cells)
        if (!(c > 0.0)) fail(ErrorKind::Domain, "cell counts must be positive");
    MeshStudy s;
    s.cellCounts = cells;
    s.solutions = solutions;
    s.r2 = std::cbrt(cells[1] / cells[0]);
    s.r3 = std::cbrt(cells[2] / cells[1]);
    return s;
}

MeshStudy MeshStudy::fromRefinement(double r2, double r3, const std::array<double, 3>& solutions) {
    MeshStudy s;
    s.r2 = r2;
    s.r3 = r3;
    s.solutions = solutions;
    return s;
}

namespace {

void checkStudy(const MeshStudy& s) {
    if (!(s.r2 > 1.0) || !(s.r3 > 1.0)) fail(ErrorKind::Domain, "refinement factors must exceed 1");
    for (double e : s.solutions)
        if (!std::isfinite(e)) fail(ErrorKind::Domain, "mesh solutions must be finite");
}

double denominator(double r, double p) {
    if (!(p > 0.0)) fail(ErrorKind::Domain, "order of convergence must be positive");
    const double d = std::pow(r, p) - 1.0;
    if (d == 0.0) fail(ErrorKind::Domain, "degenerate refinement: r^p = 1");
    return d;
}

}  // namespace

double observedOrder(const MeshStudy& s) {
    checkStudy(s);
    const double d21 = s.solutions[1] - s.solutions[0];
    const double d32 = s.solutions[2] - s.solutions[1];
    if (d21 == 0.0 || d32 == 0.0 || (d21 > 0.0) != (d32 > 0.0))
        fail(ErrorKind::Data, "non-monotone mesh convergence: solution differences change sign or vanish");
    return std::log(d21 / d32) / std::log(s.r3);
}

double richardsonExtrapolate(const MeshStudy& s, double p) {
    checkStudy(s);
    return s.solutions[2] + (s.solutions[2] - s.solutions[1]) / denominator(s.r3, p);
}

DiscretizationErrors discretizationErrors(const MeshStudy& s, double p) {
    checkStudy(s);
    DiscretizationErrors out;
    const auto& eta = s.solutions;
    out.e[1] = (eta[1] - eta[0]) / (eta[1] * denominator(s.r2, p));
    out.e[2] = (eta[2] - eta[1]) / (eta[2] * denominator(s.r3, p));
    out.e[0] = std::pow(s.r2, p) * out.e[1];
    for (int i = 0; i < 3; ++i) out.gci[std::size_t(i)] = 1.25 * out.e[std::size_t(i)];
    return out;
}

MeshStudy readMeshStudyCsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot read " + path);
    std::array<double, 3> cells{}, sol{};
    int row = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) fail(ErrorKind::Config, "mesh study rows need cells,solution");
        try {
            const double c = std::stod(a), e = std::stod(b);
            if (row >= 3) fail(ErrorKind::Config, "mesh study needs exactly three rows");
            cells[std::size_t(row)] = c;
            sol[std::size_t(row)] = e;
            ++row;
        } catch (const std::invalid_argument&) {
            if (row > 0) fail(ErrorKind::Config, "malformed mesh study row: " + line);
        }
    }
    if (row != 3) fail(ErrorKind::Config, "mesh study needs exactly three rows");
    return MeshStudy::fromCellCounts(cells, sol);
}

namespace {

VectorXd absolutePercentageErrors(const VectorXd& actual, const VectorXd& predicted) {
    if (actual.size() != predicted.size() || actual.size() < 1)
        fail(ErrorKind::Size, "percentage errors need equal, nonempty vectors");
    if ((actual.array() == 0.0).any()) fail(ErrorKind::Domain, "percentage error undefined for a zero actual value");
    return 100.0 * ((actual - predicted).array() / actual.array()).abs();
}

}  // namespace

double mape(const VectorXd& actual, const VectorXd& predicted) {
    return absolutePercentageErrors(actual, predicted).mean();
}

double maxApe(const VectorXd& actual, const VectorXd& predicted) {
    return absolutePercentageErrors(actual, predicted).maxCoeff();
}

}  // namespace dsopt
