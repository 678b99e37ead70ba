#include "dsopt/workflow.hpp"

#include "dsopt/turbine.hpp"
#include "dsopt/verification.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace dsopt {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

double toDouble(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::Config, key + ": expected a number, got '" + v + "'");
}

Index toIndex(const std::string& key, const std::string& v) {
    const double d = toDouble(key, v);
    if (d != std::floor(d) || d < 0) fail(ErrorKind::Config, key + ": expected a nonnegative integer, got '" + v + "'");
    return Index(d);
}

bool toBool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    fail(ErrorKind::Config, key + ": expected true or false, got '" + v + "'");
}

std::uint64_t deriveSeed(std::uint64_t master, std::uint64_t role, std::uint64_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (role + 1) + 0xD1B54A32D192ED03ULL * index;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum SeedRole : std::uint64_t { kDesign = 1, kValidation = 2, kBo = 3, kMetrics = 4 };

// Parses "Family p1 p2".
MarginalDistribution parseMarginal(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    std::string fam;
    in >> fam;
    std::vector<double> p;
    std::string tok;
    while (in >> tok) p.push_back(toDouble(key, tok));
    const Family f = familyFromName(fam);
    auto need = [&](std::size_t n) {
        if (p.size() != n) fail(ErrorKind::Config, key + ": " + fam + " takes " + std::to_string(n) + " parameters");
    };
    MarginalDistribution d;
    switch (f) {
    case Family::Uniform:
        need(2);
        d = UniformDist{p[0], p[1]};
        break;
    case Family::Normal:
        need(2);
        d = NormalDist{p[0], p[1]};
        break;
    case Family::Beta:
        need(4);
        d = BetaDist{p[0], p[1], p[2], p[3]};
        break;
    case Family::Gamma:
        need(3);
        d = GammaDist{p[0], p[1], p[2]};
        break;
    case Family::DiscreteUniform:
        need(2);
        d = DiscreteUniformDist{int(p[0]), int(p[1])};
        break;
    }
    try {
        validate(d);
    } catch (const Error& e) {
        fail(ErrorKind::Config, key + ": " + e.what());
    }
    return d;
}

Index dimIndex(const std::string& key, const std::string& v, const std::vector<std::string>& names) {
    const auto it = std::find(names.begin(), names.end(), v);
    if (it != names.end()) return Index(it - names.begin());
    const Index n = toIndex(key, v);
    if (n >= Index(names.size())) fail(ErrorKind::Config, key + ": dimension " + v + " out of range");
    return n;
}

}  // namespace

std::vector<ScheduleEntry> parseSchedule(const std::string& text) {
    std::vector<ScheduleEntry> out;
    for (const auto& item : split(text, ',')) {
        if (item.empty()) continue;
        const auto parts = split(item, ':');
        if (parts.size() < 2 || parts.size() > 3)
            fail(ErrorKind::Config, "schedule entry '" + item + "' is not Phase[:beta]:BxS");
        ScheduleEntry e;
        e.acquisition = AcquisitionSpec::forPhase(phaseFromName(parts[0]));
        if (parts.size() == 3) e.acquisition.beta = toDouble("schedule", parts[1]);
        const auto bs = split(parts.back(), 'x');
        if (bs.size() != 2) fail(ErrorKind::Config, "schedule entry '" + item + "' needs batches x size");
        e.batches = toIndex("schedule", bs[0]);
        e.batchSize = toIndex("schedule", bs[1]);
        if (!(e.acquisition.beta > 0.0) || e.batches < 1 || e.batchSize < 1)
            fail(ErrorKind::Config, "schedule entry '" + item + "' needs positive beta, batches and size");
        out.push_back(e);
    }
    return out;
}

std::string formatSchedule(const std::vector<ScheduleEntry>& s) {
    std::ostringstream out;
    for (std::size_t i = 0; i < s.size(); ++i)
        out << (i ? ", " : "") << name(s[i].acquisition.phase) << ':' << s[i].acquisition.beta << ':' << s[i].batches
            << 'x' << s[i].batchSize;
    return out.str();
}

void KeyValues::set(const std::string& key, const std::string& value) {
    for (auto& kv : items)
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    items.emplace_back(key, value);
}

const std::string* KeyValues::find(const std::string& key) const {
    for (const auto& kv : items)
        if (kv.first == key) return &kv.second;
    return nullptr;
}

KeyValues parseKeyValues(const std::string& text) {
    KeyValues out;
    std::istringstream in(text);
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorKind::Config, "line " + std::to_string(lineNo) + ": expected key = value");
        out.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

WorkflowConfig configFromPairs(const KeyValues& pairs) {
    WorkflowConfig c;
    c.stage1 = parseSchedule("Exploration:2:1x15, Exploration:2:5x5, Balanced:1:3x5, Exploitation:0.5:3x5");
    c.stage2 = parseSchedule("Exploration:2:1x5, Exploration:2:3x4");
    c.stage4 = parseSchedule("Exploration:2:3x3, Exploration:2:1x2");
    c.raw = pairs;

    std::vector<std::pair<std::string, std::string>> inputLines;
    std::string mandatory, refit;
    bool supportGiven = false;
    for (const auto& [k, v] : pairs.items) {
        if (k == "objective") c.objective = v;
        else if (k == "objective_dims") c.objectiveDims = toIndex(k, v);
        else if (k == "external_command") c.externalCommand = v;
        else if (k == "initial_size") c.initialSize = toIndex(k, v);
        else if (k == "validation_size") c.validationSize = toIndex(k, v);
        else if (k == "budget") c.budget = toIndex(k, v);
        else if (k == "schedule.stage1") c.stage1 = parseSchedule(v);
        else if (k == "schedule.stage2") c.stage2 = parseSchedule(v);
        else if (k == "schedule.stage4") c.stage4 = parseSchedule(v);
        else if (k == "threshold") c.threshold = toDouble(k, v);
        else if (k == "top_k") c.topK = toIndex(k, v);
        else if (k == "mandatory_dims") mandatory = v;
        else if (k == "gsa_schemes") {
            c.gsaSchemes.clear();
            for (const auto& s : split(v, ','))
                if (!s.empty()) c.gsaSchemes.push_back(basisSchemeFromName(s));
        } else if (k == "seed") c.seed = std::uint64_t(toIndex(k, v));
        else if (k == "kernel") c.kernel = kernelFamilyFromName(v);
        else if (k == "gp_starts") c.gpStarts = int(toIndex(k, v));
        else if (k == "refit_output") c.refitOutput = toBool(k, v);
        else if (k == "refit_inputs") refit = v;
        else if (k == "output_support") {
            supportGiven = true;
            const auto b = split(v, ' ');
            std::vector<std::string> parts;
            for (const auto& x : b)
                if (!x.empty()) parts.push_back(x);
            if (parts.empty() || parts[0] == "none") {
                c.outputSupport.reset();
            } else {
                if (parts.size() != 2) fail(ErrorKind::Config, "output_support: expected 'lo hi' or 'none'");
                c.outputSupport = Support{toDouble(k, parts[0]), toDouble(k, parts[1])};
                if (!(c.outputSupport->lo < c.outputSupport->hi))
                    fail(ErrorKind::Config, "output_support: lo must be below hi");
            }
        }
        else if (k == "log_surrogates") c.logSurrogates = toBool(k, v);
        else if (k == "lar_degree") c.larDegree = int(toIndex(k, v));
        else if (k == "sapce_alpha_cap") c.sapceAlphaCap = int(toIndex(k, v));
        else if (k == "design.levels") c.design.levels = int(toIndex(k, v));
        else if (k == "design.cooling_rate") c.design.coolingRate = toDouble(k, v);
        else if (k == "design.initial_temperature") c.design.initialTemperature = toDouble(k, v);
        else if (k == "design.proposals") c.design.proposalsPerPointDim = int(toIndex(k, v));
        else if (k == "design.initial_step") c.design.initialStep = toDouble(k, v);
        else if (k == "out_dir") c.outDir = v;
        else if (k.rfind("input.", 0) == 0) inputLines.emplace_back(k, v);
        else fail(ErrorKind::Config, "unknown configuration key '" + k + "'");
    }
    for (const auto& [k, v] : inputLines) {
        c.inputs.names.push_back(k.substr(6));
        c.inputs.marginals.push_back(parseMarginal(k, v));
    }

    if (!supportGiven && c.externalCommand.empty() && c.objective == "TurbineEfficiencyProxy")
        c.outputSupport = Support{0.0, 1.0};
    if (!(c.threshold >= 0.0 && c.threshold < 1.0)) fail(ErrorKind::Config, "threshold must lie in [0, 1)");
    if (c.topK < 1) fail(ErrorKind::Config, "top_k must be at least 1");
    if (c.initialSize < 2) fail(ErrorKind::Config, "initial_size must be at least 2");
    if (c.stage4.empty()) fail(ErrorKind::Config, "schedule.stage4 must not be empty");
    if (c.gpStarts < 1) fail(ErrorKind::Config, "gp_starts must be at least 1");
    if (c.externalCommand.empty() && c.inputs.dims() == 0) {
        c.inputs = makeBenchmark(c.objective, c.objectiveDims).inputs;
    } else if (c.inputs.dims() == 0) {
        try {
            c.inputs = makeBenchmark(c.objective, c.objectiveDims).inputs;
        } catch (const Error&) {
            fail(ErrorKind::Config, "an external objective needs input.<name> lines");
        }
    }
    for (const auto& s : split(mandatory, ','))
        if (!s.empty()) c.mandatoryDims.insert(dimIndex("mandatory_dims", s, c.inputs.names));
    for (const auto& s : split(refit, ',')) {
        if (s.empty()) continue;
        const Index n = dimIndex("refit_inputs", s, c.inputs.names);
        if (family(c.inputs.marginals[std::size_t(n)]) == Family::DiscreteUniform)
            fail(ErrorKind::Config, "refit_inputs: discrete dimension " + s + " cannot be refitted");
        c.refitInputs.push_back(n);
    }

    Index planned = c.initialSize + c.validationSize;
    for (const auto* st : {&c.stage1, &c.stage2, &c.stage4})
        for (const auto& e : *st) planned += e.evaluations();
    if (c.budget < c.initialSize + c.validationSize)
        fail(ErrorKind::Budget, "budget must cover the initial design and the validation set");
    if (planned > c.budget)
        fail(ErrorKind::Budget, "schedule needs " + std::to_string(planned) + " evaluations, budget is " +
                                    std::to_string(c.budget));
    if (c.topK > c.budget) fail(ErrorKind::Budget, "top_k exceeds the budget");
    return c;
}

WorkflowConfig loadConfig(const std::string& path, const KeyValues& overrides) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Config, "cannot read configuration file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    auto pairs = parseKeyValues(buf.str());
    for (const auto& [k, v] : overrides.items) pairs.set(k, v);
    return configFromPairs(pairs);
}

ObjectiveBinding bindObjective(const WorkflowConfig& config) {
    ObjectiveBinding b;
    b.inputs = config.inputs;
    if (!config.externalCommand.empty()) {
        const ExternalProcessObjective ext(config.externalCommand);
        const auto names = config.inputs.names;
        b.objective = [ext, names](const MatrixXd& unit, const MatrixXd&, MatrixXd* realized) {
            return ext.evaluate(unit, names, realized);
        };
        return b;
    }
    const Benchmark bench = makeBenchmark(config.objective, config.objectiveDims);
    if (bench.dims() != config.inputs.dims())
        fail(ErrorKind::Config, "input model has " + std::to_string(config.inputs.dims()) + " dimensions, " +
                                    bench.name + " takes " + std::to_string(bench.dims()));
    b.objective = pointwise(bench.f);
    return b;
}

const char* name(Stage s) {
    switch (s) {
    case Stage::S1_BOWithValidation:
        return "S1_BOWithValidation";
    case Stage::S2_BOFull:
        return "S2_BOFull";
    case Stage::S3_Reduction:
        return "S3_Reduction";
    case Stage::S4_BOReduced:
        return "S4_BOReduced";
    case Stage::Done:
        return "Done";
    }
    return "Done";
}

Stage stageFromName(const std::string& s) {
    for (Stage st : {Stage::S1_BOWithValidation, Stage::S2_BOFull, Stage::S3_Reduction, Stage::S4_BOReduced,
                     Stage::Done})
        if (s == name(st)) return st;
    if (s == "1") return Stage::S1_BOWithValidation;
    if (s == "2") return Stage::S2_BOFull;
    if (s == "3") return Stage::S3_Reduction;
    if (s == "4") return Stage::S4_BOReduced;
    fail(ErrorKind::Config, "unknown stage '" + s + "'");
}

VectorXd WorkflowState::bestPhysical() const {
    if (bo.bestIndex < 0) fail(ErrorKind::Data, "no evaluated designs");
    return bo.data[bo.bestIndex].physical;
}

namespace {

std::vector<double> vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd vecFrom(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), Index(v.size()));
}

// NaN does not survive JSON; stored as null.
nlohmann::json number(double d) { return std::isfinite(d) ? nlohmann::json(d) : nlohmann::json(nullptr); }
double numberFrom(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

BoContext contextFor(const WorkflowState& state, const WorkflowConfig& config) {
    BoContext ctx;
    ctx.inputs = state.inputs;
    ctx.kernel = config.kernel;
    ctx.gp.starts = config.gpStarts;
    ctx.refitOutput = config.refitOutput;
    return ctx;
}

GpModel fitSurrogate(const BoState& bo, KernelFamily family, const WorkflowConfig& config, std::uint64_t seed) {
    GpFitOptions o;
    o.starts = config.gpStarts;
    o.seed = seed;
    return fitGp(bo.trainingSet(), family, o);
}

void markStageEnd(WorkflowState& s, int stage) {
    s.stageBest[std::size_t(stage)] = s.bo.bestSoFar;
    s.stageEnd[std::size_t(stage)] = s.bo.data.size();
}

void refitInputMarginals(WorkflowState& state, const WorkflowConfig& config) {
    for (Index n : config.refitInputs) {
        std::vector<double> x;
        for (const auto& s : state.bo.data.samples()) x.push_back(s.physical(n));
        const auto fit = fitDistributionBic(x).best;
        state.inputs.marginals[std::size_t(n)] = fit;
        for (auto& s : state.bo.data.samples()) s.unit(n) = cdf(fit, s.physical(n));
    }
}

void runSchedule(WorkflowState& state, const WorkflowConfig& config, const ObjectiveBinding& objective,
                 const std::vector<ScheduleEntry>& schedule, int stage, const ProgressHook& hook,
                 bool logMetrics) {
    const BoContext ctx = contextFor(state, config);
    int step = 0;
    if (logMetrics)
        for (const auto& m : state.metrics) step = std::max(step, m.step + 1);
    for (const auto& entry : schedule)
        for (Index b = 0; b < entry.batches; ++b) {
            const std::uint64_t seed = deriveSeed(config.seed, kBo, std::uint64_t(state.bo.iteration));
            if (ctx.refitOutput) refitOutputTransform(state.bo);
            const GpModel gp = fitSurrogate(state.bo, ctx.kernel, config, seed);
            if (logMetrics) {
                const auto m = surrogateMetrics(state.bo, config, step++, ctx.kernel == KernelFamily::RBF ? &gp : nullptr);
                state.metrics.insert(state.metrics.end(), m.begin(), m.end());
            }
            boStepWithModel(state.bo, ctx, objective.objective, entry.acquisition, entry.batchSize, state.mask, stage,
                            seed, gp);
            if (hook) hook(state);
        }
    if (logMetrics) {
        if (ctx.refitOutput) refitOutputTransform(state.bo);
        const auto m = surrogateMetrics(state.bo, config, step, nullptr);
        state.metrics.insert(state.metrics.end(), m.begin(), m.end());
    }
}

void requireStage(const WorkflowState& s, Stage expected) {
    if (s.stage != expected)
        fail(ErrorKind::Config, std::string("state is at stage ") + name(s.stage) + ", expected " + name(expected));
}

}  // namespace

std::vector<SurrogateMetric> surrogateMetrics(const BoState& bo, const WorkflowConfig& config, int step,
                                              const GpModel* rbf) {
    const Dataset val = bo.data.filter({Partition::Validation});
    if (val.empty() || bo.trainOnValidation) return {};
    const Dataset train = bo.trainingSet();
    const MatrixXd U = train.unitMatrix(), Uv = val.unitMatrix();
    const VectorXd z = train.transformedResponses(), actual = val.responses();
    const Index N = U.cols(), Q = U.rows();
    std::vector<SurrogateMetric> out;
    auto record = [&](const std::string& model, const std::function<VectorXd()>& predictZ) {
        SurrogateMetric m{step, Q, model, std::numeric_limits<double>::quiet_NaN(),
                          std::numeric_limits<double>::quiet_NaN()};
        try {
            const VectorXd zp = predictZ();
            VectorXd eta(zp.size());
            for (Index i = 0; i < zp.size(); ++i) eta(i) = inverseTransform(bo.transform, zp(i));
            m.mape = mape(actual, eta);
            m.maxApe = maxApe(actual, eta);
        } catch (const Error&) {
        }
        out.push_back(m);
    };
    const std::uint64_t seed = deriveSeed(config.seed, kMetrics, std::uint64_t(step));
    for (KernelFamily f : {KernelFamily::RBF, KernelFamily::Matern32, KernelFamily::Matern52})
        record(std::string("GP-") + name(f), [&] {
            VectorXd mean, var;
            if (f == KernelFamily::RBF && rbf)
                rbf->predict(Uv, mean, var);
            else
                fitSurrogate(bo, f, config, seed).predict(Uv, mean, var);
            return mean;
        });
    record("PCE-TD1", [&] { return evaluatePceRows(fitPceLeastSquares(U, z, buildTotalDegreeBasis(N, 1)), Uv); });
    record("PCE-TD2", [&] { return evaluatePceRows(fitPceLeastSquares(U, z, buildTotalDegreeBasis(N, 2)), Uv); });
    record("PCE-LAR", [&] {
        const auto cand = buildTotalDegreeBasis(N, config.larDegree);
        return evaluatePceRows(fitPceLeastSquares(U, z, buildLarBasis(U, z, cand, std::max<Index>(1, Q - 2))), Uv);
    });
    record("PCE-SAPCE", [&] {
        return evaluatePceRows(
            fitPceLeastSquares(U, z, buildSapceBasis(U, z, config.sapceAlphaCap, std::max<Index>(1, Q - 2))), Uv);
    });
    return out;
}

std::vector<SobolResult> pceSensitivities(const BoState& bo, const WorkflowConfig& config) {
    const Dataset train = bo.trainingSet();
    const MatrixXd U = train.unitMatrix();
    const VectorXd z = train.transformedResponses();
    const Index N = U.cols(), Q = U.rows();
    std::vector<SobolResult> out;
    out.push_back(sobolFromPce(fitPceLeastSquares(U, z, buildTotalDegreeBasis(N, 2))));
    out.push_back(sobolFromPce(fitPceLeastSquares(U, z, buildSapceBasis(U, z, config.sapceAlphaCap, Q - 2))));
    out.push_back(sobolFromPce(
        fitPceLeastSquares(U, z, buildLarBasis(U, z, buildTotalDegreeBasis(N, config.larDegree), Q - 2))));
    return out;
}

WorkflowState runStage1(const WorkflowConfig& config, const ObjectiveBinding& objective, const ProgressHook& hook) {
    WorkflowState s;
    s.inputs = objective.inputs;
    const Index N = s.inputs.dims();
    s.mask = SubspaceMask::full(N);
    s.bo.budget = config.budget;
    s.bo.transform.support = config.outputSupport;
    const BoContext ctx = contextFor(s, config);

    const auto design = maxProDesign(config.initialSize, N, deriveSeed(config.seed, kDesign, 0), config.design);
    evaluateAndAppend(s.bo, ctx, objective.objective, design.points, Partition::Training, 1);
    if (hook) hook(s);
    refitInputMarginals(s, config);

    if (config.validationSize > 0) {
        std::mt19937_64 rng(deriveSeed(config.seed, kValidation, 0));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        MatrixXd V(config.validationSize, N);
        for (Index i = 0; i < V.rows(); ++i)
            for (Index n = 0; n < N; ++n) V(i, n) = unif(rng);
        evaluateAndAppend(s.bo, contextFor(s, config), objective.objective, V, Partition::Validation, 1);
        if (hook) hook(s);
    }
    refitOutputTransform(s.bo);
    runSchedule(s, config, objective, config.stage1, 1, hook, config.logSurrogates);
    markStageEnd(s, 1);
    s.stage = Stage::S2_BOFull;
    return s;
}

void runStage2(WorkflowState& state, const WorkflowConfig& config, const ObjectiveBinding& objective,
               const ProgressHook& hook) {
    requireStage(state, Stage::S2_BOFull);
    state.bo.trainOnValidation = true;
    refitInputMarginals(state, config);
    refitOutputTransform(state.bo);
    runSchedule(state, config, objective, config.stage2, 2, hook, false);
    markStageEnd(state, 2);
    state.stage = Stage::S3_Reduction;
}

void runStage3(WorkflowState& state, const WorkflowConfig& config) {
    requireStage(state, Stage::S3_Reduction);
    refitOutputTransform(state.bo);
    state.sobol = pceSensitivities(state.bo, config);
    std::vector<SobolResult> used;
    for (const auto& r : state.sobol)
        for (BasisScheme b : config.gsaSchemes)
            if (r.scheme == name(b)) used.push_back(r);
    if (used.empty()) fail(ErrorKind::Config, "gsa_schemes selects none of TD2, SAPCE, LAR");
    state.mask = fixNonInfluential(state.bo.data,
                                   selectInfluentialSubspace(used, config.threshold, config.mandatoryDims),
                                   config.topK);
    state.mask.fixedValues = state.inputs.snapDiscrete(state.mask.fixedValues);
    markStageEnd(state, 3);
    state.stage = Stage::S4_BOReduced;
}

void runStage4(WorkflowState& state, const WorkflowConfig& config, const ObjectiveBinding& objective,
               const ProgressHook& hook) {
    requireStage(state, Stage::S4_BOReduced);
    runSchedule(state, config, objective, config.stage4, 4, hook, false);
    // Spend what is left with the last stage-4 phase.
    const ScheduleEntry last = config.stage4.back();
    while (state.bo.budgetUsed < state.bo.budget) {
        ScheduleEntry e = last;
        e.batches = 1;
        e.batchSize = std::min(last.batchSize, state.bo.budget - state.bo.budgetUsed);
        runSchedule(state, config, objective, {e}, 4, hook, false);
    }
    markStageEnd(state, 4);
    state.stage = Stage::Done;
}

void runNextStage(WorkflowState& state, const WorkflowConfig& config, const ObjectiveBinding& objective,
                  const ProgressHook& hook) {
    switch (state.stage) {
    case Stage::S1_BOWithValidation:
        state = runStage1(config, objective, hook);
        break;
    case Stage::S2_BOFull:
        runStage2(state, config, objective, hook);
        break;
    case Stage::S3_Reduction:
        runStage3(state, config);
        break;
    case Stage::S4_BOReduced:
        runStage4(state, config, objective, hook);
        break;
    case Stage::Done:
        break;
    }
    if (hook) hook(state);
}

WorkflowState runWorkflow(const WorkflowConfig& config, const ObjectiveBinding& objective,
                          const WorkflowState* resume, const ProgressHook& hook) {
    WorkflowState s = resume ? *resume : WorkflowState{};
    while (s.stage != Stage::Done) runNextStage(s, config, objective, hook);
    return s;
}

// ---- persistence -------------------------------------------------------------------------------

nlohmann::json toJson(const WorkflowState& s) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& x : s.bo.data.samples())
        samples.push_back({{"unit", vec(x.unit)},
                           {"physical", vec(x.physical)},
                           {"response", x.response},
                           {"transformed", x.transformed},
                           {"partition", name(x.partition)},
                           {"stage", x.stage}});
    nlohmann::json log = nlohmann::json::array();
    for (const auto& r : s.bo.log) log.push_back(toJson(r));
    nlohmann::json sobol = nlohmann::json::array();
    for (const auto& r : s.sobol) sobol.push_back(toJson(r, s.inputs.names));
    nlohmann::json metrics = nlohmann::json::array();
    for (const auto& m : s.metrics)
        metrics.push_back({{"step", m.step},
                           {"trainingSize", m.trainingSize},
                           {"model", m.model},
                           {"mape", number(m.mape)},
                           {"maxApe", number(m.maxApe)}});
    nlohmann::json stageBest = nlohmann::json::array();
    for (double b : s.stageBest) stageBest.push_back(number(b));
    return {{"stage", name(s.stage)},
            {"inputs", toJson(s.inputs)},
            {"mask", toJson(s.mask)},
            {"budget", s.bo.budget},
            {"budgetUsed", s.bo.budgetUsed},
            {"bestSoFar", number(s.bo.bestSoFar)},
            {"bestIndex", s.bo.bestIndex},
            {"iteration", s.bo.iteration},
            {"trainOnValidation", s.bo.trainOnValidation},
            {"outputDistribution", toJson(s.bo.transform.fitted)},
            {"outputSupport", s.bo.transform.support
                                  ? nlohmann::json::array({s.bo.transform.support->lo, s.bo.transform.support->hi})
                                  : nlohmann::json(nullptr)},
            {"samples", samples},
            {"log", log},
            {"sobol", sobol},
            {"metrics", metrics},
            {"stageBest", stageBest},
            {"stageEnd", s.stageEnd}};
}

WorkflowState workflowStateFromJson(const nlohmann::json& j) {
    try {
        WorkflowState s;
        s.stage = stageFromName(j.at("stage").get<std::string>());
        s.inputs = inputModelFromJson(j.at("inputs"));
        s.mask = subspaceMaskFromJson(j.at("mask"));
        s.bo.budget = j.at("budget").get<Index>();
        s.bo.budgetUsed = j.at("budgetUsed").get<Index>();
        s.bo.bestSoFar = j.at("bestSoFar").is_null() ? -std::numeric_limits<double>::infinity()
                                                     : j.at("bestSoFar").get<double>();
        s.bo.bestIndex = j.at("bestIndex").get<Index>();
        s.bo.iteration = j.at("iteration").get<int>();
        s.bo.trainOnValidation = j.at("trainOnValidation").get<bool>();
        s.bo.transform.fitted = distributionFromJson(j.at("outputDistribution"));
        if (!j.at("outputSupport").is_null())
            s.bo.transform.support = Support{j.at("outputSupport")[0].get<double>(), j.at("outputSupport")[1].get<double>()};
        for (const auto& x : j.at("samples")) {
            Sample smp;
            smp.unit = vecFrom(x.at("unit"));
            smp.physical = vecFrom(x.at("physical"));
            smp.response = x.at("response").get<double>();
            smp.transformed = x.at("transformed").get<double>();
            smp.partition = partitionFromName(x.at("partition").get<std::string>());
            smp.stage = x.at("stage").get<int>();
            s.bo.data.push_back(std::move(smp));
        }
        for (const auto& r : j.at("log")) s.bo.log.push_back(boRecordFromJson(r));
        for (const auto& r : j.at("sobol")) {
            SobolResult res;
            res.scheme = r.at("scheme").get<std::string>();
            res.variance = r.at("variance").get<double>();
            const auto& idx = r.at("indices");
            res.firstOrder.resize(Index(idx.size()));
            res.totalOrder.resize(Index(idx.size()));
            for (std::size_t n = 0; n < idx.size(); ++n) {
                res.firstOrder(Index(n)) = idx[n].at("S_F").get<double>();
                res.totalOrder(Index(n)) = idx[n].at("S_T").get<double>();
            }
            s.sobol.push_back(res);
        }
        for (const auto& m : j.at("metrics"))
            s.metrics.push_back({m.at("step").get<int>(), m.at("trainingSize").get<Index>(),
                                 m.at("model").get<std::string>(), numberFrom(m.at("mape")),
                                 numberFrom(m.at("maxApe"))});
        const auto& sb = j.at("stageBest");
        for (std::size_t k = 0; k < sb.size() && k < s.stageBest.size(); ++k) s.stageBest[k] = numberFrom(sb[k]);
        s.stageEnd = j.at("stageEnd").get<std::vector<Index>>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, std::string("malformed workflow state: ") + e.what());
    }
}

void saveState(const WorkflowState& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path);
    out << toJson(s).dump(1) << '\n';
}

WorkflowState loadState(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, path + ": " + e.what());
    }
    return workflowStateFromJson(j);
}

void writeDatasetCsv(const Dataset& data, const std::vector<std::string>& names, const std::string& path,
                     Index firstRow, bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path);
    out.precision(17);
    const Index N = data.dims();
    auto nm = [&](Index n) { return std::size_t(n) < names.size() ? names[std::size_t(n)] : "x" + std::to_string(n + 1); };
    if (!append) {
        out << "index";
        for (Index n = 0; n < N; ++n) out << ",u_" << nm(n);
        for (Index n = 0; n < N; ++n) out << ",x_" << nm(n);
        out << ",response,transformed,partition,stage\n";
    }
    for (Index i = firstRow; i < data.size(); ++i) {
        const auto& s = data[i];
        out << i;
        for (Index n = 0; n < N; ++n) out << ',' << s.unit(n);
        for (Index n = 0; n < N; ++n) out << ',' << s.physical(n);
        out << ',' << s.response << ',' << s.transformed << ',' << name(s.partition) << ',' << s.stage << '\n';
    }
}

Dataset readDatasetCsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Io, path + " is empty");
    const auto header = split(line, ',');
    const Index N = Index(std::count_if(header.begin(), header.end(), [](const std::string& h) { return h.rfind("u_", 0) == 0; }));
    if (Index(header.size()) != 2 * N + 5) fail(ErrorKind::Io, path + ": unexpected header");
    Dataset d;
    int lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (trim(line).empty()) continue;
        const auto f = split(line, ',');
        if (Index(f.size()) != 2 * N + 5) fail(ErrorKind::Io, path + ": bad row at line " + std::to_string(lineNo));
        Sample s;
        s.unit.resize(N);
        s.physical.resize(N);
        try {
            for (Index n = 0; n < N; ++n) {
                s.unit(n) = std::stod(f[std::size_t(1 + n)]);
                s.physical(n) = std::stod(f[std::size_t(1 + N + n)]);
            }
            s.response = std::stod(f[std::size_t(1 + 2 * N)]);
            s.transformed = std::stod(f[std::size_t(2 + 2 * N)]);
            s.stage = std::stoi(f[std::size_t(4 + 2 * N)]);
        } catch (const std::exception&) {
            fail(ErrorKind::Io, path + ": non-numeric value at line " + std::to_string(lineNo));
        }
        s.partition = partitionFromName(f[std::size_t(3 + 2 * N)]);
        d.push_back(std::move(s));
    }
    return d;
}

void emitReport(const WorkflowState& state, const std::string& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const std::string& file) {
        std::ofstream out(dir + "/" + file);
        if (!out) fail(ErrorKind::Io, "cannot write " + dir + "/" + file);
        out.precision(17);
        return out;
    };
    const Dataset& data = state.bo.data;

    {
        auto out = open("surrogate_metrics.csv");
        out << "step,training_size,model,mape,maxape\n";
        for (const auto& m : state.metrics)
            out << m.step << ',' << m.trainingSize << ',' << m.model << ',' << m.mape << ',' << m.maxApe << '\n';
    }
    writeSobolCsv(state.sobol, state.inputs.names, dir + "/sobol.csv");
    {
        auto out = open("histogram.csv");
        out << "stage,bin,lower,upper,count\n";
        const Index bins = 20;
        if (!data.empty()) {
            const VectorXd y = data.responses();
            const double lo = y.minCoeff(), hi = y.maxCoeff();
            const double w = hi > lo ? (hi - lo) / double(bins) : 1.0;
            std::map<int, std::vector<Index>> counts;
            for (const auto& s : data.samples()) {
                auto& c = counts[s.stage];
                c.resize(std::size_t(bins), 0);
                const Index b = std::min<Index>(bins - 1, Index(std::floor((s.response - lo) / w)));
                ++c[std::size_t(b)];
            }
            for (const auto& [stage, c] : counts)
                for (Index b = 0; b < bins; ++b)
                    out << stage << ',' << b << ',' << lo + double(b) * w << ',' << lo + double(b + 1) * w << ','
                        << c[std::size_t(b)] << '\n';
        }
    }
    {
        auto out = open("trajectory.csv");
        out << "step,sample,stage,response,best_so_far,running_mean,stage_start\n";
        double best = -std::numeric_limits<double>::infinity(), sum = 0.0;
        Index k = 0;
        int prevStage = 0;
        for (Index i = 0; i < data.size(); ++i) {
            const auto& s = data[i];
            best = std::max(best, s.response);
            if (s.partition != Partition::Adaptive) continue;
            ++k;
            sum += s.response;
            out << k << ',' << i << ',' << s.stage << ',' << s.response << ',' << best << ',' << sum / double(k) << ','
                << (s.stage != prevStage ? 1 : 0) << '\n';
            prevStage = s.stage;
        }
    }
    {
        auto out = open("stages.csv");
        out << "stage,samples,best\n";
        for (int st = 1; st <= 4; ++st)
            if (state.stageEnd[std::size_t(st)] > 0)
                out << st << ',' << state.stageEnd[std::size_t(st)] << ',' << state.stageBest[std::size_t(st)] << '\n';
    }
    {
        auto out = open("best_design.csv");
        out << "parameter,unit,physical,active\n";
        if (state.bo.bestIndex >= 0) {
            const auto& s = data[state.bo.bestIndex];
            for (Index n = 0; n < s.unit.size(); ++n)
                out << (std::size_t(n) < state.inputs.names.size() ? state.inputs.names[std::size_t(n)]
                                                                   : "x" + std::to_string(n + 1))
                    << ',' << s.unit(n) << ',' << s.physical(n) << ','
                    << (state.mask.dims() == s.unit.size() && !state.mask.isActive(n) ? 0 : 1) << '\n';
            out << "response,," << s.response << ",\n";
        }
    }
}

}  // namespace dsopt
