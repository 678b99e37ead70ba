#include "dsopt/sensitivity.hpp"

#include <algorithm>
#include <fstream>
#include <random>

namespace dsopt {

double pceVariance(const PceModel& model) {
    double v = 0.0;
    for (Index p = 0; p < model.basis.size(); ++p)
        if (totalDegree(model.basis.indices[std::size_t(p)]) > 0) v += model.coefficients(p) * model.coefficients(p);
    return v;
}

SobolResult sobolFromPce(const PceModel& model) {
    const Index N = model.basis.dims();
    SobolResult r;
    r.variance = pceVariance(model);
    r.scheme = name(model.basis.scheme);
    if (!(r.variance > 0.0)) fail(ErrorKind::Data, "degenerate PCE model: zero variance");
    r.firstOrder = VectorXd::Zero(N);
    r.totalOrder = VectorXd::Zero(N);
    for (Index p = 0; p < model.basis.size(); ++p) {
        const auto& a = model.basis.indices[std::size_t(p)];
        const double c2 = model.coefficients(p) * model.coefficients(p);
        Index nonzero = 0, last = -1;
        for (Index n = 0; n < N; ++n)
            if (a[std::size_t(n)] > 0) {
                ++nonzero;
                last = n;
                r.totalOrder(n) += c2;
            }
        if (nonzero == 1) r.firstOrder(last) += c2;
    }
    r.firstOrder /= r.variance;
    r.totalOrder /= r.variance;
    return r;
}

SubspaceMask SubspaceMask::full(Index N) {
    SubspaceMask m;
    m.active.assign(std::size_t(N), true);
    m.fixedValues = VectorXd::Constant(N, 0.5);
    return m;
}

Index SubspaceMask::activeCount() const { return Index(std::count(active.begin(), active.end(), true)); }

std::vector<Index> SubspaceMask::activeDims() const {
    std::vector<Index> out;
    for (Index n = 0; n < dims(); ++n)
        if (isActive(n)) out.push_back(n);
    return out;
}

void SubspaceMask::apply(VectorXd& u) const {
    if (u.size() != dims()) fail(ErrorKind::Size, "point dimension does not match the mask");
    for (Index n = 0; n < dims(); ++n)
        if (!isActive(n)) u(n) = fixedValues(n);
}

nlohmann::json toJson(const SubspaceMask& m) {
    return {{"active", m.active},
            {"fixedValues", std::vector<double>(m.fixedValues.data(), m.fixedValues.data() + m.fixedValues.size())}};
}

SubspaceMask subspaceMaskFromJson(const nlohmann::json& j) {
    SubspaceMask m;
    m.active = j.at("active").get<std::vector<bool>>();
    const auto v = j.at("fixedValues").get<std::vector<double>>();
    if (v.size() != m.active.size()) fail(ErrorKind::Io, "mask fixed values do not match its dimension");
    m.fixedValues = Eigen::Map<const VectorXd>(v.data(), Index(v.size()));
    return m;
}

SubspaceMask selectInfluentialSubspace(const std::vector<SobolResult>& results, double threshold,
                                       const std::set<Index>& mandatory, double borderlineMargin) {
    if (results.empty()) fail(ErrorKind::Config, "subspace selection needs at least one Sobol' result");
    if (!(threshold >= 0.0 && threshold < 1.0)) fail(ErrorKind::Config, "threshold must lie in [0, 1)");
    const Index N = results.front().dims();
    SubspaceMask m;
    m.active.assign(std::size_t(N), false);
    m.fixedValues = VectorXd::Constant(N, 0.5);
    const double borderline = (1.0 - borderlineMargin) * threshold;
    for (const auto& r : results) {
        if (r.dims() != N) fail(ErrorKind::Size, "Sobol' results differ in dimension");
        for (Index n = 0; n < N; ++n)
            if (r.totalOrder(n) >= threshold || r.totalOrder(n) > borderline) m.active[std::size_t(n)] = true;
    }
    for (Index n : mandatory) {
        if (n < 0 || n >= N) fail(ErrorKind::Config, "mandatory dimension out of range");
        m.active[std::size_t(n)] = true;
    }
    if (m.activeCount() == 0)
        fail(ErrorKind::Selection, "no influential dimensions at threshold " + std::to_string(threshold) +
                                       "; lower the threshold or name mandatory dimensions");
    return m;
}

SobolResult sobolMonteCarlo(const PointObjective& objective, const InputModel& inputs, Index nBase,
                            std::uint64_t seed) {
    const Index N = inputs.dims();
    if (nBase < 2) fail(ErrorKind::Config, "Monte Carlo base sample too small");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    MatrixXd A(nBase, N), B(nBase, N);
    for (Index i = 0; i < nBase; ++i)
        for (Index n = 0; n < N; ++n) A(i, n) = unif(rng);
    for (Index i = 0; i < nBase; ++i)
        for (Index n = 0; n < N; ++n) B(i, n) = unif(rng);

    auto f = [&](const VectorXd& u) { return objective(inputs.toPhysical(u)); };
    VectorXd fA(nBase), fB(nBase);
    for (Index i = 0; i < nBase; ++i) {
        fA(i) = f(A.row(i).transpose());
        fB(i) = f(B.row(i).transpose());
    }
    const double mean = 0.5 * (fA.mean() + fB.mean());
    const double var =
        ((fA.array() - mean).square().sum() + (fB.array() - mean).square().sum()) / double(2 * nBase - 1);

    SobolResult r;
    r.scheme = "MonteCarlo";
    r.variance = var;
    r.firstOrder = VectorXd::Zero(N);
    r.totalOrder = VectorXd::Zero(N);
    if (!(var > 0.0)) return r;
    for (Index n = 0; n < N; ++n) {
        double first = 0.0, total = 0.0;
        for (Index i = 0; i < nBase; ++i) {
            VectorXd u = A.row(i).transpose();
            u(n) = B(i, n);
            const double fABn = f(u);
            first += (fB(i) - mean) * (fABn - fA(i));
            total += (fA(i) - fABn) * (fA(i) - fABn);
        }
        r.firstOrder(n) = std::clamp(first / double(nBase) / var, 0.0, 1.0);
        r.totalOrder(n) = std::max(std::clamp(0.5 * total / double(nBase) / var, 0.0, 1.0), r.firstOrder(n));
    }
    return r;
}

namespace {

std::string dimName(const std::vector<std::string>& names, Index n) {
    return std::size_t(n) < names.size() ? names[std::size_t(n)] : "x" + std::to_string(n + 1);
}

}  // namespace

nlohmann::json toJson(const SobolResult& r, const std::vector<std::string>& names) {
    nlohmann::json dims = nlohmann::json::array();
    for (Index n = 0; n < r.dims(); ++n)
        dims.push_back({{"dim", n}, {"name", dimName(names, n)}, {"S_F", r.firstOrder(n)}, {"S_T", r.totalOrder(n)}});
    return {{"scheme", r.scheme}, {"variance", r.variance}, {"indices", dims}};
}

void writeSobolCsv(const std::vector<SobolResult>& results, const std::vector<std::string>& names,
                   const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path);
    out.precision(17);
    out << "dim,name,S_F,S_T,scheme\n";
    for (const auto& r : results)
        for (Index n = 0; n < r.dims(); ++n)
            out << n << ',' << dimName(names, n) << ',' << r.firstOrder(n) << ',' << r.totalOrder(n) << ',' << r.scheme
                << '\n';
}

}  // namespace dsopt
