// dsopt: command-line front end of the design-space optimization workflow.

#include "dsopt/design.hpp"
#include "dsopt/turbine.hpp"
#include "dsopt/verification.hpp"
#include "dsopt/workflow.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace dsopt;

namespace {

struct Overrides {
    std::string config;
    std::string objective;
    std::string outDir;
    std::uint64_t seed = 0;
    bool seedGiven = false;
};

void addOverrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "key-value configuration file");
    cmd->add_option("--objective", o.objective, "benchmark objective (overrides the config)");
    cmd->add_option("--out-dir", o.outDir, "output directory (overrides the config)");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&o](const std::uint64_t& s) { o.seed = s, o.seedGiven = true; }, "master seed (overrides the config)");
}

WorkflowConfig configFor(const Overrides& o) {
    KeyValues kv;
    if (!o.objective.empty()) kv.set("objective", o.objective);
    if (!o.outDir.empty()) kv.set("out_dir", o.outDir);
    if (o.seedGiven) kv.set("seed", std::to_string(o.seed));
    if (o.config.empty()) return configFromPairs(kv);
    return loadConfig(o.config, kv);
}

/// Keeps dataset.csv and runlog.jsonl in step with the state, appending only what is new.
class RunFiles {
public:
    RunFiles(std::string dir, const WorkflowState& state)
        : dir_(std::move(dir)), rows_(state.data().size()), records_(state.bo.log.size()) {
        fs::create_directories(dir_);
    }

    void sync(const WorkflowState& s) {
        if (s.data().size() > rows_) {
            const bool fresh = !fs::exists(datasetPath());
            writeDatasetCsv(s.data(), s.inputs.names, datasetPath(), fresh ? 0 : rows_, !fresh);
            rows_ = s.data().size();
        }
        if (s.bo.log.size() > records_) {
            std::ofstream out(dir_ + "/runlog.jsonl", std::ios::app);
            if (!out) fail(ErrorKind::Io, "cannot write " + dir_ + "/runlog.jsonl");
            for (std::size_t i = records_; i < s.bo.log.size(); ++i) out << toJson(s.bo.log[i]).dump() << '\n';
            records_ = s.bo.log.size();
        }
    }

    void snapshot(const WorkflowState& s, int finishedStage) {
        sync(s);
        saveState(s, dir_ + "/state_stage" + std::to_string(finishedStage) + ".json");
        saveState(s, statePath());
    }

    std::string statePath() const { return dir_ + "/state.json"; }

private:
    std::string datasetPath() const { return dir_ + "/dataset.csv"; }

    std::string dir_;
    Index rows_ = 0;
    std::size_t records_ = 0;
};

void printStageLine(const WorkflowState& s, int stage) {
    std::cout << "stage " << stage << ": " << s.data().size() << " samples, best " << std::setprecision(6)
              << s.stageBest[std::size_t(stage)] << ", budget " << s.bo.budgetUsed << "/" << s.bo.budget << "\n";
}

void printBest(const WorkflowState& s) {
    if (s.bo.bestIndex < 0) return;
    const VectorXd x = s.bestPhysical();
    std::cout << "best response " << std::setprecision(8) << s.bo.bestSoFar << " at\n";
    for (Index n = 0; n < x.size(); ++n)
        std::cout << "  " << std::setw(6) << std::left << s.inputs.names[std::size_t(n)] << std::right << " "
                  << std::setprecision(6) << x(n) << (s.mask.isActive(n) ? "" : "  (inactive)") << "\n";
}

int stageNumber(Stage s) {
    switch (s) {
    case Stage::S1_BOWithValidation:
        return 1;
    case Stage::S2_BOFull:
        return 2;
    case Stage::S3_Reduction:
        return 3;
    case Stage::S4_BOReduced:
        return 4;
    case Stage::Done:
        return 5;
    }
    return 5;
}

void runStages(WorkflowState& state, const WorkflowConfig& config, bool untilDone) {
    const ObjectiveBinding objective = bindObjective(config);
    RunFiles files(config.outDir, state);
    const ProgressHook hook = [&files](const WorkflowState& s) { files.sync(s); };
    do {
        const int stage = stageNumber(state.stage);
        runNextStage(state, config, objective, hook);
        files.snapshot(state, stage);
        printStageLine(state, stage);
    } while (untilDone && state.stage != Stage::Done);
    emitReport(state, config.outDir);
    printBest(state);
}

void printSobol(const std::vector<SobolResult>& results, const std::vector<std::string>& names) {
    std::cout << std::setw(8) << "input";
    for (const auto& r : results) std::cout << std::setw(10) << (r.scheme + " S1") << std::setw(10) << (r.scheme + " ST");
    std::cout << "\n" << std::fixed << std::setprecision(4);
    for (std::size_t n = 0; n < names.size(); ++n) {
        std::cout << std::setw(8) << names[n];
        for (const auto& r : results)
            std::cout << std::setw(10) << r.firstOrder(Index(n)) << std::setw(10) << r.totalOrder(Index(n));
        std::cout << "\n";
    }
    std::cout << std::defaultfloat;
}

int cmdDesign(const Overrides& o, Index size, Index dims, const std::string& criterion, const std::string& out) {
    const WorkflowConfig config = configFor(o);
    std::vector<std::string> names = config.inputs.names;
    if (dims > 0 && dims != Index(names.size())) {
        names.clear();
        for (Index n = 0; n < dims; ++n) names.push_back("x" + std::to_string(n + 1));
    }
    const Index N = Index(names.size());
    const Index Q = size > 0 ? size : config.initialSize;
    DesignMatrix d;
    const DesignCriterion c = designCriterionFromName(criterion);
    if (c == DesignCriterion::MaxPro)
        d = maxProDesign(Q, N, config.seed, config.design);
    else if (c == DesignCriterion::LhsOnly)
        d = lhsDesign(Q, N, config.seed);
    else
        fail(ErrorKind::Config, "design supports the MaxPro and LHS criteria");
    const std::string path = out.empty() ? config.outDir + "/design.csv" : out;
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    writeDesignCsv(d, names, path);
    std::ofstream side(path + ".json");
    if (!side) fail(ErrorKind::Io, "cannot write " + path + ".json");
    side << designSidecar(d, config.design).dump(2) << '\n';
    std::cout << Q << " x " << N << " " << name(d.criterion) << " design, criterion " << std::setprecision(10)
              << d.criterionValue << " -> " << path << "\n";
    return 0;
}

int cmdRun(const Overrides& o, bool resume) {
    const WorkflowConfig config = configFor(o);
    WorkflowState state;
    const std::string statePath = config.outDir + "/state.json";
    if (resume && fs::exists(statePath)) {
        state = loadState(statePath);
        std::cout << "resuming at " << name(state.stage) << "\n";
    } else if (fs::exists(config.outDir + "/dataset.csv")) {
        fail(ErrorKind::Config, config.outDir + " already holds a run; use --resume or another --out-dir");
    }
    if (state.stage == Stage::Done) {
        emitReport(state, config.outDir);
        printBest(state);
        return 0;
    }
    runStages(state, config, true);
    return 0;
}

int cmdStage(const Overrides& o, const std::string& which) {
    const WorkflowConfig config = configFor(o);
    const Stage wanted = stageFromName(which);
    const std::string statePath = config.outDir + "/state.json";
    WorkflowState state;
    if (wanted != Stage::S1_BOWithValidation) {
        if (!fs::exists(statePath)) fail(ErrorKind::Config, "no saved state in " + config.outDir);
        state = loadState(statePath);
    } else if (fs::exists(config.outDir + "/dataset.csv")) {
        fail(ErrorKind::Config, config.outDir + " already holds a run");
    }
    if (state.stage != wanted)
        fail(ErrorKind::Config, std::string("saved state is at ") + name(state.stage) + ", not " + name(wanted));
    runStages(state, config, false);
    return 0;
}

int cmdGsa(const Overrides& o, const std::string& dataPath, const std::string& out) {
    const WorkflowConfig config = configFor(o);
    BoState bo;
    bo.data = readDatasetCsv(dataPath);
    if (bo.data.dims() != config.inputs.dims())
        fail(ErrorKind::Config, "dataset has " + std::to_string(bo.data.dims()) + " inputs, the input model " +
                                    std::to_string(config.inputs.dims()));
    bo.trainOnValidation = true;
    bo.transform.support = config.outputSupport;
    refitOutputTransform(bo);
    const auto results = pceSensitivities(bo, config);
    std::vector<SobolResult> used;
    for (const auto& r : results)
        for (BasisScheme b : config.gsaSchemes)
            if (r.scheme == name(b)) used.push_back(r);
    const SubspaceMask mask = fixNonInfluential(
        bo.data, selectInfluentialSubspace(used, config.threshold, config.mandatoryDims), config.topK);
    printSobol(results, config.inputs.names);
    std::cout << "influential:";
    for (Index n : mask.activeDims()) std::cout << ' ' << config.inputs.names[std::size_t(n)];
    std::cout << "\n";
    const std::string dir = out.empty() ? config.outDir : out;
    fs::create_directories(dir);
    writeSobolCsv(results, config.inputs.names, dir + "/sobol.csv");
    std::ofstream m(dir + "/mask.json");
    if (!m) fail(ErrorKind::Io, "cannot write " + dir + "/mask.json");
    m << toJson(mask).dump(2) << '\n';
    return 0;
}

int cmdMeshStudy(const std::string& path) {
    const MeshStudy s = readMeshStudyCsv(path);
    const double p = observedOrder(s);
    const double ex = richardsonExtrapolate(s, p);
    const auto e = discretizationErrors(s, p);
    std::cout << std::fixed << std::setprecision(4) << "observed order p  " << p << "\n"
              << "extrapolated      " << std::setprecision(6) << ex << "\n\n"
              << "mesh  cells        solution   r      e [%]   GCI [%]\n";
    const double r[3] = {std::numeric_limits<double>::quiet_NaN(), s.r2, s.r3};
    for (int i = 0; i < 3; ++i) {
        std::cout << std::setw(4) << i + 1 << "  " << std::setw(11) << std::setprecision(0) << s.cellCounts[std::size_t(i)]
                  << "  " << std::setprecision(6) << s.solutions[std::size_t(i)] << "  ";
        if (i == 0)
            std::cout << "  -   ";
        else
            std::cout << std::setprecision(3) << r[i] << " ";
        std::cout << std::setprecision(2) << std::setw(7) << 100.0 * e.e[std::size_t(i)] << "  " << std::setw(7)
                  << 100.0 * e.gci[std::size_t(i)] << "\n";
    }
    return 0;
}

int cmdBench(const Overrides& o, Index dims, Index nBase, Index samples, int degree) {
    const std::string objective = o.objective.empty() ? "Ishigami" : o.objective;
    const Benchmark b = makeBenchmark(objective, dims);
    const std::uint64_t seed = o.seedGiven ? o.seed : 1;
    std::cout << b.name << ", " << b.dims() << " inputs\n";

    std::vector<SobolResult> results;
    if (b.analyticFirstOrder && b.analyticTotalOrder) {
        SobolResult a;
        a.scheme = "exact";
        a.firstOrder = *b.analyticFirstOrder;
        a.totalOrder = *b.analyticTotalOrder;
        results.push_back(a);
    }
    const auto t0 = std::chrono::steady_clock::now();
    SobolResult mc = sobolMonteCarlo([&b](const VectorXd& x) { return b(x); }, b.inputs, nBase, seed);
    mc.scheme = "MC";
    results.push_back(mc);
    const auto t1 = std::chrono::steady_clock::now();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    MatrixXd U(samples, b.dims());
    VectorXd y(samples);
    for (Index i = 0; i < samples; ++i) {
        for (Index n = 0; n < b.dims(); ++n) U(i, n) = unif(rng);
        y(i) = b.evaluateUnit(U.row(i).transpose());
    }
    const PceModel pce = fitPceLeastSquares(U, y, buildTotalDegreeBasis(b.dims(), degree));
    SobolResult pr = sobolFromPce(pce);
    pr.scheme = "PCE";
    results.push_back(pr);
    const auto t2 = std::chrono::steady_clock::now();

    std::vector<std::string> names = b.inputs.names;
    printSobol(results, names);
    std::cout << "MC " << nBase << " base samples: " << std::chrono::duration<double>(t1 - t0).count() << " s; PCE TD"
              << degree << " (" << pce.basis.size() << " terms, " << samples
              << " samples): " << std::chrono::duration<double>(t2 - t1).count() << " s\n";
    if (b.optimumValue) std::cout << "known optimum " << std::setprecision(10) << *b.optimumValue << "\n";
    return 0;
}

int cmdReport(const Overrides& o, const std::string& statePath) {
    const WorkflowConfig config = configFor(o);
    const std::string path = statePath.empty() ? config.outDir + "/state.json" : statePath;
    const WorkflowState s = loadState(path);
    emitReport(s, config.outDir);
    std::cout << "report for " << name(s.stage) << " state (" << s.data().size() << " samples) -> " << config.outDir
              << "\n";
    printBest(s);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Design-space optimization: MaxPro design, Bayesian optimization and PCE sensitivity analysis"};
    app.require_subcommand(1);
    Overrides o;

    auto* design = app.add_subcommand("design", "generate an initial design");
    Index designSize = 0, designDims = 0;
    std::string criterion = "MaxPro", designOut;
    addOverrides(design, o);
    design->add_option("-n,--size", designSize, "number of points (default: initial_size)");
    design->add_option("-d,--dims", designDims, "number of inputs (default: the input model)");
    design->add_option("--criterion", criterion, "MaxPro or LhsOnly");
    design->add_option("-o,--output", designOut, "design CSV path");

    auto* run = app.add_subcommand("run", "run the full workflow");
    bool resume = false;
    addOverrides(run, o);
    run->add_flag("--resume", resume, "continue from <out-dir>/state.json");

    auto* stage = app.add_subcommand("stage", "run one stage from the saved state");
    std::string which;
    addOverrides(stage, o);
    stage->add_option("stage", which, "1, 2, 3 or 4")->required();

    auto* gsa = app.add_subcommand("gsa", "PCE Sobol' indices and subspace selection on a dataset");
    std::string gsaData, gsaOut;
    addOverrides(gsa, o);
    gsa->add_option("dataset", gsaData, "dataset CSV")->required()->check(CLI::ExistingFile);
    gsa->add_option("-o,--output", gsaOut, "directory for sobol.csv and mask.json");

    auto* verify = app.add_subcommand("verify", "solution verification");
    verify->require_subcommand(1);
    auto* mesh = verify->add_subcommand("mesh-study", "order of convergence, Richardson extrapolation and GCI");
    std::string meshCsv;
    mesh->add_option("csv", meshCsv, "three rows of cells,solution, coarse to fine")->required();

    auto* bench = app.add_subcommand("bench", "Sobol' indices of a benchmark: exact, Monte Carlo and PCE");
    Index benchDims = 0, nBase = 1 << 14, pceSamples = 400;
    int degree = 6;
    bench->add_option("--objective", o.objective, "benchmark name");
    bench->add_option_function<std::uint64_t>(
        "--seed", [&o](const std::uint64_t& s) { o.seed = s, o.seedGiven = true; }, "seed");
    bench->add_option("-d,--dims", benchDims, "dimension for scalable benchmarks");
    bench->add_option("--n-base", nBase, "Monte Carlo base sample size");
    bench->add_option("--samples", pceSamples, "PCE training samples");
    bench->add_option("--degree", degree, "PCE total degree");

    auto* report = app.add_subcommand("report", "write report CSVs from a saved state");
    std::string reportState;
    addOverrides(report, o);
    report->add_option("--state", reportState, "state JSON (default: <out-dir>/state.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*design) return cmdDesign(o, designSize, designDims, criterion, designOut);
        if (*run) return cmdRun(o, resume);
        if (*stage) return cmdStage(o, which);
        if (*gsa) return cmdGsa(o, gsaData, gsaOut);
        if (*mesh) return cmdMeshStudy(meshCsv);
        if (*bench) return cmdBench(o, benchDims, nBase, pceSamples, degree);
        if (*report) return cmdReport(o, reportState);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exitCode(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
