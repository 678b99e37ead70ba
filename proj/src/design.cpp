#include "dsopt/design.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace dsopt {

const char* name(DesignCriterion c) {
    switch (c) {
    case DesignCriterion::MaxPro:
        return "MaxPro";
    case DesignCriterion::Maximin:
        return "Maximin";
    case DesignCriterion::PhiP:
        return "PhiP";
    case DesignCriterion::LhsOnly:
        return "LhsOnly";
    }
    return "LhsOnly";
}

DesignCriterion designCriterionFromName(const std::string& s) {
    for (auto c : {DesignCriterion::MaxPro, DesignCriterion::Maximin, DesignCriterion::PhiP, DesignCriterion::LhsOnly})
        if (s == name(c)) return c;
    fail(ErrorKind::Config, "unknown design criterion '" + s + "'");
}

nlohmann::json toJson(const AnnealSchedule& s) {
    return {{"initialTemperature", s.initialTemperature},
            {"coolingRate", s.coolingRate},
            {"levels", s.levels},
            {"proposalsPerPointDim", s.proposalsPerPointDim},
            {"initialStep", s.initialStep}};
}

AnnealSchedule annealScheduleFromJson(const nlohmann::json& j) {
    AnnealSchedule s;
    s.initialTemperature = j.value("initialTemperature", s.initialTemperature);
    s.coolingRate = j.value("coolingRate", s.coolingRate);
    s.levels = j.value("levels", s.levels);
    s.proposalsPerPointDim = j.value("proposalsPerPointDim", s.proposalsPerPointDim);
    s.initialStep = j.value("initialStep", s.initialStep);
    return s;
}

DesignMatrix lhsDesign(Index Q, Index N, std::uint64_t seed) {
    if (Q < 2) fail(ErrorKind::Size, "a Latin hypercube needs at least two points");
    if (N < 1) fail(ErrorKind::Size, "a Latin hypercube needs at least one dimension");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    DesignMatrix d;
    d.points.resize(Q, N);
    d.seed = seed;
    std::vector<Index> perm(static_cast<std::size_t>(Q));
    for (Index n = 0; n < N; ++n) {
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Index i = 0; i < Q; ++i) {
            double jitter = unif(rng);
            while (jitter <= 0.0) jitter = unif(rng);
            d.points(i, n) = (double(perm[static_cast<std::size_t>(i)]) + jitter) / double(Q);
        }
    }
    d.criterion = DesignCriterion::LhsOnly;
    d.criterionValue = maxProValue(d.points);
    return d;
}

namespace {

// Reflects a coordinate back into (0,1).
double reflect(double x) {
    while (x < 0.0 || x > 1.0) x = x < 0.0 ? -x : 2.0 - x;
    return x;
}

}  // namespace

DesignMatrix maxProDesign(Index Q, Index N, std::uint64_t seed, const AnnealSchedule& schedule) {
    DesignMatrix start = lhsDesign(Q, N, seed);
    MatrixXd X = start.points;

    // Pair terms prod_n gap^-2, kept in full so a move updates one row in O(Q).
    MatrixXd T = MatrixXd::Zero(Q, Q);
    auto recomputeSum = [&] {
        double s = 0.0;
        for (Index i = 0; i < Q; ++i)
            for (Index j = i + 1; j < Q; ++j) s += T(i, j);
        return s;
    };
    for (Index i = 0; i < Q; ++i)
        for (Index j = i + 1; j < Q; ++j) T(i, j) = T(j, i) = std::exp(logMaxProPairTerm(X.row(i), X.row(j)));
    double S = recomputeSum();

    MatrixXd bestX = X;
    double bestS = S;

    std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
    std::uniform_int_distribution<Index> pickPoint(0, Q - 1);
    std::uniform_int_distribution<Index> pickDim(0, N - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd newTerms(Q);

    const long proposals = long(schedule.proposalsPerPointDim) * long(Q) * long(N);
    double temperature = schedule.initialTemperature;
    for (int level = 0; level < schedule.levels; ++level) {
        const double sigma = schedule.initialStep * temperature / schedule.initialTemperature;
        for (long k = 0; k < proposals; ++k) {
            const Index i = pickPoint(rng);
            const Index d = pickDim(rng);
            const double oldValue = X(i, d);
            const double newValue = reflect(oldValue + sigma * normal(rng));
            if (newValue <= 0.0 || newValue >= 1.0) continue;
            bool coincident = false;
            double delta = 0.0;
            for (Index j = 0; j < Q && !coincident; ++j) {
                if (j == i) continue;
                const double gNew = std::abs(newValue - X(j, d));
                if (gNew < kCoincidenceGap) {
                    coincident = true;
                    break;
                }
                const double gOld = X(i, d) - X(j, d);
                newTerms(j) = T(i, j) * (gOld * gOld) / (gNew * gNew);
                delta += newTerms(j) - T(i, j);
            }
            if (coincident) continue;
            const double Snew = S + delta;
            if (!(Snew > 0.0)) continue;
            const double change = (std::log(Snew) - std::log(S)) / double(N);
            if (change > 0.0 && unif(rng) >= std::exp(-change / temperature)) continue;
            X(i, d) = newValue;
            for (Index j = 0; j < Q; ++j)
                if (j != i) T(i, j) = T(j, i) = newTerms(j);
            S = Snew;
            if (S < bestS) {
                bestS = S;
                bestX = X;
            }
        }
        S = recomputeSum();
        temperature *= schedule.coolingRate;
    }

    DesignMatrix out;
    out.points = bestX;
    out.criterion = DesignCriterion::MaxPro;
    out.criterionValue = maxProValue(bestX);
    out.seed = seed;
    // The running sum can drift from the exact value by rounding; never report worse than the start.
    if (out.criterionValue > start.criterionValue) {
        out.points = start.points;
        out.criterionValue = start.criterionValue;
    }
    return out;
}

DesignMatrix bestMaxProDesign(Index Q, Index N, const std::vector<std::uint64_t>& seeds,
                              const AnnealSchedule& schedule) {
    if (seeds.empty()) fail(ErrorKind::Config, "at least one seed is required");
    DesignMatrix best;
    bool have = false;
    for (auto seed : seeds) {
        DesignMatrix d = maxProDesign(Q, N, seed, schedule);
        if (!have || d.criterionValue < best.criterionValue ||
            (d.criterionValue == best.criterionValue && d.seed < best.seed)) {
            best = std::move(d);
            have = true;
        }
    }
    return best;
}

std::map<std::vector<Index>, double> projectionQuality(const MatrixXd& X, Index subsetSize) {
    const Index N = X.cols();
    if (subsetSize < 1 || subsetSize > N) fail(ErrorKind::Size, "subset size must lie in [1, N]");
    std::map<std::vector<Index>, double> out;
    std::vector<bool> mask(static_cast<std::size_t>(N), false);
    std::fill(mask.begin(), mask.begin() + subsetSize, true);
    do {
        std::vector<Index> cols;
        for (Index n = 0; n < N; ++n)
            if (mask[static_cast<std::size_t>(n)]) cols.push_back(n);
        MatrixXd sub(X.rows(), subsetSize);
        for (Index c = 0; c < subsetSize; ++c) sub.col(c) = X.col(cols[static_cast<std::size_t>(c)]);
        out[cols] = maxProValue(sub);
    } while (std::prev_permutation(mask.begin(), mask.end()));
    return out;
}

namespace {

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
                           73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163};

double radicalInverse(std::uint64_t i, int base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * double(i % std::uint64_t(base));
        i /= std::uint64_t(base);
        f *= inv;
    }
    return r;
}

}  // namespace

MatrixXd haltonPoints(Index count, Index N, std::uint64_t seed) {
    if (N > Index(std::size(kPrimes))) fail(ErrorKind::Size, "Halton sequence supports at most 38 dimensions");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    VectorXd shift(N);
    for (Index n = 0; n < N; ++n) shift(n) = unif(rng);
    MatrixXd P(count, N);
    for (Index i = 0; i < count; ++i)
        for (Index n = 0; n < N; ++n) {
            double v = radicalInverse(std::uint64_t(i + 1), kPrimes[n]) + shift(n);
            v -= std::floor(v);
            P(i, n) = std::clamp(v, 1e-9, 1.0 - 1e-9);
        }
    return P;
}

void writeDesignCsv(const DesignMatrix& d, const std::vector<std::string>& names, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path);
    for (Index n = 0; n < d.dims(); ++n) {
        if (n) out << ',';
        out << (std::size_t(n) < names.size() ? names[std::size_t(n)] : "x" + std::to_string(n + 1));
    }
    out << '\n';
    out.precision(17);
    for (Index i = 0; i < d.size(); ++i) {
        for (Index n = 0; n < d.dims(); ++n) {
            if (n) out << ',';
            out << d.points(i, n);
        }
        out << '\n';
    }
}

MatrixXd readDesignCsv(const std::string& path, std::vector<std::string>* names) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot read " + path);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != header.size()) fail(ErrorKind::Io, "ragged row in " + path);
        rows.push_back(std::move(row));
    }
    MatrixXd X(Index(rows.size()), Index(header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t n = 0; n < header.size(); ++n) X(Index(i), Index(n)) = rows[i][n];
    if (names) *names = header;
    return X;
}

nlohmann::json designSidecar(const DesignMatrix& d, const AnnealSchedule& schedule) {
    return {{"criterion", name(d.criterion)},
            {"criterionValue", d.criterionValue},
            {"seed", d.seed},
            {"Q", d.size()},
            {"N", d.dims()},
            {"schedule", toJson(schedule)}};
}

}  // namespace dsopt
