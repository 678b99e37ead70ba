// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Criterion numbers on the command line select a subset; `--freeze` writes the desk-scale
// regression fixture when criterion 8 passes.

#include "dsopt/bayes_opt.hpp"
#include "dsopt/design.hpp"
#include "dsopt/gp.hpp"
#include "dsopt/pce.hpp"
#include "dsopt/probability.hpp"
#include "dsopt/sensitivity.hpp"
#include "dsopt/turbine.hpp"
#include "dsopt/verification.hpp"
#include "dsopt/workflow.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace dsopt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;
std::set<int> selected;

void criterion(int id, const char* title, double limitSeconds, const std::function<void(Outcome&)>& body) {
    if (!selected.empty() && !selected.count(id)) return;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limitSeconds > 0.0) o.require(secs < limitSeconds, "runtime limit " + std::to_string(limitSeconds) + " s");
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << id << ' ' << title << ':' << o.detail.str() << " ("
              << std::setprecision(3) << secs << " s)" << std::endl;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dsopt_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

nlohmann::json withoutTimestamps(nlohmann::json j) {
    for (auto& r : j["log"]) r.erase("timestamp");
    return j;
}

bool sameCsvFiles(const fs::path& a, const fs::path& b, std::string* which) {
    int count = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().extension() != ".csv") continue;
        ++count;
        const fs::path other = b / e.path().filename();
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
            *which = e.path().filename().string();
            return false;
        }
    }
    return count > 0;
}

// Dense-inverse GP prediction in extended precision, independent of the Cholesky path.
Prediction denseOracle(const KernelSpec& k, const MatrixXd& X, const VectorXd& y, double noise, const VectorXd& xs) {
    using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const Index Q = X.rows();
    MatL K(Q, Q);
    VecL ks(Q);
    for (Index i = 0; i < Q; ++i) {
        ks(i) = kernelEval(k, X.row(i), xs);
        for (Index j = 0; j < Q; ++j) K(i, j) = kernelEval(k, X.row(i), X.row(j));
        K(i, i) += noise;
    }
    const MatL Kinv = K.inverse();
    const VecL yl = y.cast<long double>();
    return {double(ks.dot(Kinv * yl)), double(kernelEval(k, xs, xs) - ks.dot(Kinv * ks))};
}

bool relClose(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

template <class T>
double mean(const std::vector<T>& v) {
    double s = 0.0;
    for (const auto& x : v) s += double(x);
    return s / double(v.size());
}

// ---------------------------------------------------------------------------------------------

void meshStudy(Outcome& o) {
    const auto s = MeshStudy::fromRefinement(1.98, 1.98, {0.810187, 0.830857, 0.835337});
    const double p = observedOrder(s);
    const auto e = discretizationErrors(s, p);
    o.detail << std::fixed << std::setprecision(4) << " p = " << p << ", e = " << std::setprecision(2)
             << 100 * e.e[0] << "/" << 100 * e.e[1] << "/" << 100 * e.e[2] << " %";
    o.require(std::abs(p - 2.24) <= 0.01, "p");
    const double ref[3] = {3.18, 0.69, 0.15};
    for (int i = 0; i < 3; ++i) o.require(std::abs(100 * e.e[std::size_t(i)] - ref[i]) <= 0.02, "e" + std::to_string(i + 1));
}

void maxProCriterion(Outcome& o) {
    MatrixXd one(2, 1), two(2, 2);
    one << 0.25, 0.75;
    two << 0.2, 0.2, 0.7, 0.8;
    const double v1 = maxProValue(one), v2 = maxProValue(two);
    o.detail << std::setprecision(10) << " psi1 = " << v1 << ", psi2 = " << v2 << ";";
    o.require(std::abs(v1 - 4.0) < 1e-9, "1D value");
    o.require(std::abs(v2 - 10.0 / 3.0) < 1e-9, "2D value");

    for (const auto [Q, N] : {std::pair<Index, Index>{20, 5}, {200, 10}}) {
        std::vector<double> annealed, starts, baselines;
        const auto t0 = std::chrono::steady_clock::now();
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            annealed.push_back(maxProDesign(Q, N, seed).criterionValue);
            starts.push_back(lhsDesign(Q, N, seed).criterionValue);
            baselines.push_back(lhsDesign(Q, N, 1000 + seed).criterionValue);
            o.require(annealed.back() < starts.back(), "seed " + std::to_string(seed) + " beats its start");
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.detail << std::setprecision(4) << " Q=" << Q << ": annealed " << mean(annealed) << " vs start " << mean(starts)
                 << " vs LHS " << mean(baselines) << " (" << std::setprecision(3) << secs << " s);";
        o.require(mean(annealed) < mean(starts), "mean below the starts");
        o.require(mean(annealed) < mean(baselines), "mean below plain LHS");
        if (Q == 200) o.require(secs < 300.0, "Q=200 runtime");
    }
}

void projection(Outcome& o) {
    std::map<std::vector<Index>, double> mp, lhs;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (const auto& [k, v] : projectionQuality(maxProDesign(50, 6, seed).points, 2)) mp[k] += v / 10.0;
        for (const auto& [k, v] : projectionQuality(lhsDesign(50, 6, 1000 + seed).points, 2)) lhs[k] += v / 10.0;
    }
    o.require(mp.size() == 15, "15 pairs");
    int wins = 0;
    double worst = 0.0;
    for (const auto& [k, v] : mp) {
        wins += v < lhs[k];
        worst = std::max(worst, v / lhs[k]);
    }
    o.detail << " MaxPro wins " << wins << "/15 pairs, worst mean ratio " << std::setprecision(4) << worst;
    o.require(wins == 15, "every pair");
}

void gpExactness(Outcome& o) {
    const KernelFamily families[] = {KernelFamily::RBF, KernelFamily::Matern32, KernelFamily::Matern52};
    double worstMean = 0.0, worstVar = 0.0, worstDense = 0.0, worstGrad = 0.0;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int p = 0; p < 20; ++p) {
        const Index N = 1 + p % 4, Q = 6 + p;
        const auto family = families[p % 3];
        const MatrixXd X = lhsDesign(Q, N, std::uint64_t(100 + p)).points;
        VectorXd y(Q);
        for (Index i = 0; i < Q; ++i) y(i) = std::sin(5.0 * X(i, 0) + p) + X.row(i).squaredNorm();
        GpFitOptions opts;
        opts.seed = std::uint64_t(p);
        const auto gp = fitGp(X, y, family, opts);
        for (Index i = 0; i < Q; ++i) {
            const auto pr = gp.predict(VectorXd(X.row(i).transpose()));
            worstMean = std::max(worstMean, std::abs(pr.mean - y(i)));
            worstVar = std::max(worstVar, pr.variance);
        }

        // Algebraic checks use moderate random hyperparameters so the oracles stay well conditioned.
        KernelSpec k{family, VectorXd(N), 0.5 + 1.5 * U(rng)};
        for (Index n = 0; n < N; ++n) k.lengthscales(n) = 0.2 + 0.8 * U(rng);

        const Index Qs = std::min<Index>(Q, 8);
        const MatrixXd Xs = X.topRows(Qs);
        const VectorXd ys = y.head(Qs);
        const GpModel small(k, Xs, ys, 1e-10);
        for (int t = 0; t < 10; ++t) {
            VectorXd xs(N);
            for (Index n = 0; n < N; ++n) xs(n) = U(rng);
            const auto a = small.predict(xs);
            const auto b = denseOracle(k, Xs, ys, small.effectiveNoiseVariance(), xs);
            worstDense = std::max({worstDense, std::abs(a.mean - b.mean) / std::max(1.0, std::abs(b.mean)),
                                   std::abs(a.variance - std::max(b.variance, 0.0)) / std::max(1.0, std::abs(b.variance))});
        }

        const double noise = 1e-4;
        VectorXd g;
        logMarginalLikelihood(k, X, y, noise, &g);
        for (Index j = 0; j <= N; ++j) {
            const double h = 1e-5;
            auto shifted = [&](double sign) {
                KernelSpec s = k;
                if (j < N)
                    s.lengthscales(j) *= std::exp(sign * h);
                else
                    s.outputScale *= std::exp(sign * h);
                return logMarginalLikelihood(s, X, y, noise);
            };
            const double fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
            worstGrad = std::max(worstGrad, std::abs(g(j) - fd) / std::max(1.0, std::abs(fd)));
        }
    }
    o.detail << std::scientific << std::setprecision(2) << " max |dmean| " << worstMean << ", max var " << worstVar
             << ", dense vs Cholesky " << worstDense << ", gradient vs FD " << worstGrad;
    o.require(worstMean < 1e-5, "interpolation");
    o.require(worstVar < 1e-6, "variance");
    o.require(worstDense < 1e-8, "dense inverse");
    o.require(worstGrad < 1e-4, "gradient");
}

void ishigami(Outcome& o) {
    const auto b = makeBenchmark("Ishigami");
    const VectorXd S = *b.analyticFirstOrder, T = *b.analyticTotalOrder;
    const MatrixXd u = lhsDesign(2000, 3, 2024).points;
    VectorXd z(u.rows());
    for (Index i = 0; i < u.rows(); ++i) z(i) = b.evaluateUnit(u.row(i).transpose());
    const auto pce = sobolFromPce(fitPceLeastSquares(u, z, buildTotalDegreeBasis(3, 9)));
    const auto mc = sobolMonteCarlo(b.f, b.inputs, Index(1) << 14, 7);

    const double paper[4] = {0.3139, 0.4424, 0.0, 0.2437};
    const double got[4] = {pce.firstOrder(0), pce.firstOrder(1), pce.firstOrder(2), pce.totalOrder(2)};
    const char* label[4] = {"S1", "S2", "S3", "S3T"};
    o.detail << std::fixed << std::setprecision(4);
    for (int i = 0; i < 4; ++i) {
        o.detail << ' ' << label[i] << ' ' << got[i];
        o.require(std::abs(got[i] - paper[i]) <= 0.02, std::string(label[i]) + " vs analytic");
    }
    o.require(std::abs(S(0) - 0.3139) < 1e-3 && std::abs(S(1) - 0.4424) < 1e-3 && std::abs(T(2) - 0.2437) < 1e-3,
              "analytic reference");
    double worst = 0.0;
    for (Index n = 0; n < 3; ++n)
        worst = std::max({worst, std::abs(pce.firstOrder(n) - mc.firstOrder(n)),
                          std::abs(pce.totalOrder(n) - mc.totalOrder(n))});
    o.detail << "; max |PCE - MC| " << worst;
    o.require(worst <= 0.02, "PCE vs Monte Carlo");
}

void fixture(Outcome& o) {
    PceModel m;
    m.basis = BasisSet{{{0, 0}, {1, 0}, {0, 1}, {1, 1}}, BasisScheme::TD2};
    m.coefficients = Eigen::Vector4d(1.0, 2.0, 1.0, 1.0);
    const auto r = sobolFromPce(m);
    o.detail << std::setprecision(17) << " S1 " << r.firstOrder(0) << ", S2 " << r.firstOrder(1) << ", S1T "
             << r.totalOrder(0) << ", S2T " << r.totalOrder(1);
    const double tol = 1e-15;
    o.require(relClose(r.firstOrder(0), 2.0 / 3.0, tol), "S1");
    o.require(relClose(r.firstOrder(1), 1.0 / 6.0, tol), "S2");
    o.require(relClose(r.totalOrder(0), 5.0 / 6.0, tol), "S1T");
    o.require(relClose(r.totalOrder(1), 1.0 / 3.0, tol), "S2T");
}

// ---------------------------------------------------------------------------------------------

struct DeskRun {
    std::uint64_t seed = 0;
    WorkflowState state;
    double initialMax = 0.0;
};

const WorkflowConfig& deskConfig(std::uint64_t seed) {
    static std::map<std::uint64_t, WorkflowConfig> cache;
    auto it = cache.find(seed);
    if (it == cache.end()) {
        KeyValues kv;
        kv.set("seed", std::to_string(seed));
        it = cache.emplace(seed, loadConfig(DSOPT_SOURCE_DIR "/configs/desk.cfg", kv)).first;
    }
    return it->second;
}

double deskSeconds = 0.0;

// Ten seeded desk runs, computed on first use.
const std::vector<DeskRun>& deskRuns() {
    static const std::vector<DeskRun> runs = [] {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<DeskRun> out;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const auto& cfg = deskConfig(seed);
            DeskRun r;
            r.seed = seed;
            r.state = runWorkflow(cfg, bindObjective(cfg));
            r.initialMax = -INFINITY;
            for (const auto& smp : r.state.data().samples())
                if (smp.stage == 0) r.initialMax = std::max(r.initialMax, smp.response);
            out.push_back(std::move(r));
        }
        deskSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }();
    return runs;
}

std::vector<Index> influentialDims() { return turbineInfluentialDims(); }

void stagingProperties(Outcome& o) {
    const double u = ucb(0.5, 0.2, 2.0);
    o.detail << std::setprecision(17) << " ucb = " << u << ";";
    o.require(u == 0.9, "ucb value");
    int monotone = 0, exact = 0;
    for (const auto& r : deskRuns()) {
        const auto& s = r.state;
        bool mono = true;
        double prev = -INFINITY;
        for (const auto& rec : s.bo.log) {
            mono = mono && rec.bestSoFar >= prev;
            prev = rec.bestSoFar;
        }
        mono = mono && s.stageBest[1] >= r.initialMax && s.stageBest[2] >= s.stageBest[1] &&
               s.stageBest[4] >= s.stageBest[2];
        bool bit = s.mask.activeCount() < s.mask.dims();
        for (const auto& smp : s.data().samples()) {
            if (smp.stage != 4) continue;
            for (Index n = 0; n < s.mask.dims(); ++n)
                if (!s.mask.isActive(n)) bit = bit && smp.unit(n) == s.mask.fixedValues(n);
        }
        monotone += mono;
        exact += bit;
    }
    const int runs = int(deskRuns().size());
    o.detail << " best-so-far nondecreasing " << monotone << "/" << runs << ", stage-4 mask exact " << exact << "/"
             << runs;
    o.require(runs == 10 && monotone == runs, "nondecreasing best");
    o.require(exact == runs, "mask");
}

const fs::path kFixture = fs::path(DSOPT_SOURCE_DIR) / "tests" / "fixtures" / "desk_regression.csv";

std::string fixtureRow(const DeskRun& r) {
    std::ostringstream s;
    s << r.seed << ',';
    const auto a = r.state.mask.activeDims();
    for (std::size_t i = 0; i < a.size(); ++i) s << (i ? " " : "") << a[i];
    s << std::setprecision(17) << ',' << r.initialMax << ',' << r.state.stageBest[2] << ',' << r.state.stageBest[4];
    return s.str();
}

void deskWorkflow(Outcome& o, bool freeze) {
    deskRuns();
    const double secs = deskSeconds;

    int recovered = 0, beatsInitial = 0, beatsStage2 = 0;
    for (const auto& r : deskRuns()) {
        const auto& s = r.state;
        recovered += s.mask.activeDims() == influentialDims();
        beatsInitial += s.stageBest[4] > r.initialMax;
        beatsStage2 += s.stageBest[4] > s.stageBest[2];
    }
    o.detail << " exact 5-dim recovery " << recovered << "/10, final > initial max " << beatsInitial
             << "/10, final > stage-2 best " << beatsStage2 << "/10 (" << std::setprecision(3) << secs << " s)";
    o.require(recovered >= 9, "subspace recovery");
    o.require(beatsInitial == 10, "improvement over the initial design");
    o.require(beatsStage2 >= 8, "improvement over stage 2");
    o.require(secs < 600.0, "ten-seed runtime");

    if (freeze && !o.pass) {
        o.detail << "; fixture not frozen";
    } else if (freeze) {
        fs::create_directories(kFixture.parent_path());
        std::ofstream out(kFixture);
        out << "seed,active_dims,initial_max,stage2_best,final_best\n";
        for (const auto& r : deskRuns()) out << fixtureRow(r) << '\n';
        o.detail << "; fixture frozen";
    } else if (fs::exists(kFixture)) {
        std::ifstream in(kFixture);
        std::string line;
        std::getline(in, line);
        int matched = 0;
        for (const auto& r : deskRuns())
            if (std::getline(in, line) && line == fixtureRow(r)) ++matched;
        o.detail << "; regression fixture " << matched << "/10";
        o.require(matched == 10, "regression fixture");
    }
}

void transformChain(Outcome& o) {
    const std::vector<MarginalDistribution> families = {UniformDist{0.6, 0.85}, NormalDist{0.85, 0.03},
                                                        BetaDist{2.0, 5.0, 0.7, 0.95}, GammaDist{3.0, 2.0, 0.5}};
    double worst = 0.0;
    int clamped = 0;
    std::uint64_t seed = 90;
    for (const auto& d : families) {
        std::mt19937_64 rng(++seed);
        const OutputTransform t{d};
        for (int i = 0; i < 1000; ++i) {
            const double eta = sample(d, rng);
            bool c = false;
            const double z = forwardTransform(t, eta, &c);
            if (c) {
                ++clamped;
                continue;
            }
            worst = std::max(worst, std::abs(inverseTransform(t, z) - eta));
        }
    }
    int recovered = 0;
    seed = 2000;
    for (const auto& d : families) {
        std::mt19937_64 rng(++seed);
        std::vector<double> xs(2000);
        for (auto& x : xs) x = sample(d, rng);
        recovered += family(fitDistributionBic(xs).best) == family(d);
    }
    o.detail << " max roundtrip error " << std::scientific << std::setprecision(2) << worst << " (" << clamped
             << " clamped), BIC recovers " << recovered << "/4 families";
    o.require(worst < 1e-8, "roundtrip");
    o.require(recovered == 4, "BIC");
}

void determinism(Outcome& o) {
    const auto& cfg = deskConfig(1);
    const auto obj = bindObjective(cfg);
    const auto& reference = deskRuns().front().state;
    const auto refJson = withoutTimestamps(toJson(reference));
    const auto a = scratch("report_a"), b = scratch("report_b");
    emitReport(reference, a.string());
    emitReport(runWorkflow(cfg, obj), b.string());
    std::string which;
    const bool same = sameCsvFiles(a, b, &which);
    o.detail << " repeated run " << (same ? "byte-identical" : "differs in " + which) << ";";
    o.require(same, "identical reports");

    for (int stop = 1; stop <= 3; ++stop) {
        WorkflowState s;
        for (int k = 0; k < stop; ++k) runNextStage(s, cfg, obj);
        const fs::path dir = scratch("resume_" + std::to_string(stop));
        saveState(s, (dir / "state.json").string());
        const auto loaded = loadState((dir / "state.json").string());
        const auto done = runWorkflow(cfg, obj, &loaded);
        emitReport(done, dir.string());
        std::string diff;
        const bool ok = withoutTimestamps(toJson(done)) == refJson && sameCsvFiles(a, dir, &diff);
        o.detail << " resume after stage " << stop << (ok ? " matches" : " differs") << (stop < 3 ? "," : "");
        o.require(ok, "resume after stage " + std::to_string(stop));
    }
}

}  // namespace

int main(int argc, char** argv) {
    bool freeze = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--freeze") == 0)
            freeze = true;
        else
            selected.insert(std::atoi(argv[i]));

    criterion(1, "mesh study", 1e-3, meshStudy);
    criterion(2, "MaxPro criterion and annealing", 0.0, maxProCriterion);
    criterion(3, "MaxPro projections", 0.0, projection);
    criterion(4, "GP exactness", 30.0, gpExactness);
    criterion(5, "Ishigami indices", 120.0, ishigami);
    criterion(6, "four-coefficient PCE fixture", 0.0, fixture);
    criterion(7, "UCB and staging", 0.0, stagingProperties);
    criterion(8, "desk-scale workflow on the turbine proxy", 0.0, [&](Outcome& o) { deskWorkflow(o, freeze); });
    criterion(9, "output transform chain", 0.0, transformChain);
    criterion(10, "determinism and resume", 0.0, determinism);

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
