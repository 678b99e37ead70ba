#include "dsopt/bayes_opt.hpp"

#include "dsopt/design.hpp"
#include "dsopt/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>

namespace dsopt {

const char* name(Phase p) {
    switch (p) {
    case Phase::Exploration:
        return "Exploration";
    case Phase::Balanced:
        return "Balanced";
    case Phase::Exploitation:
        return "Exploitation";
    }
    return "Exploration";
}

Phase phaseFromName(const std::string& s) {
    for (Phase p : {Phase::Exploration, Phase::Balanced, Phase::Exploitation})
        if (s == name(p)) return p;
    fail(ErrorKind::Config, "unknown phase '" + s + "'");
}

double defaultBeta(Phase p) {
    switch (p) {
    case Phase::Exploration:
        return 2.0;
    case Phase::Balanced:
        return 1.0;
    case Phase::Exploitation:
        return 0.5;
    }
    return 2.0;
}

double ucb(double mean, double stddev, double beta) {
    if (!(stddev >= 0.0)) fail(ErrorKind::Domain, "UCB needs a nonnegative standard deviation");
    return mean + beta * stddev;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool tooClose(const VectorXd& x, const std::vector<VectorXd>& taken, double sep) {
    for (const auto& t : taken)
        if ((x - t).norm() < sep) return true;
    return false;
}

Proposal maximizeExcluding(const GpModel& model, const AcquisitionSpec& spec, const SubspaceMask& mask,
                           std::uint64_t seed, const AcquisitionOptions& opts, const std::vector<VectorXd>& taken) {
    const Index N = model.dims();
    if (mask.dims() != N) fail(ErrorKind::Size, "mask dimension does not match the model");
    const auto active = mask.activeDims();
    if (active.empty()) fail(ErrorKind::Config, "mask has no active dimension");
    const Index A = Index(active.size());

    auto embed = [&](const VectorXd& a) {
        VectorXd x = mask.fixedValues;
        for (Index k = 0; k < A; ++k) x(active[std::size_t(k)]) = a(k);
        return x;
    };
    auto acquisition = [&](const VectorXd& x) {
        if (tooClose(x, taken, opts.minSeparation)) return kNegInf;
        const Prediction p = model.predict(x);
        return ucb(p.mean, p.stddev(), spec.beta);
    };

    const MatrixXd pool = haltonPoints(opts.poolSize, A, seed);
    MatrixXd full(pool.rows(), N);
    for (Index i = 0; i < pool.rows(); ++i) full.row(i) = embed(pool.row(i).transpose()).transpose();
    VectorXd mean, var;
    model.predict(full, mean, var);
    VectorXd score(pool.rows());
    for (Index i = 0; i < pool.rows(); ++i)
        score(i) = tooClose(full.row(i).transpose(), taken, opts.minSeparation)
                       ? kNegInf
                       : ucb(mean(i), std::sqrt(var(i)), spec.beta);

    std::vector<Index> order(std::size_t(pool.rows()));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return score(a) > score(b); });
    if (order.empty() || score(order.front()) == kNegInf)
        fail(ErrorKind::Data, "no admissible acquisition candidate");

    Proposal best{full.row(order.front()).transpose(), score(order.front())};
    optim::PatternSearchOptions ps;
    ps.initialStep = 0.1;
    ps.minStep = 1e-6;
    ps.maxIterations = opts.refineIterations;
    const VectorXd lo = VectorXd::Zero(A), hi = VectorXd::Ones(A);
    for (Index s = 0; s < std::min<Index>(opts.refineStarts, pool.rows()); ++s) {
        const Index i = order[std::size_t(s)];
        if (score(i) == kNegInf) break;
        const auto r = optim::patternSearchMaximize([&](const VectorXd& a) { return acquisition(embed(a)); },
                                                    pool.row(i).transpose(), lo, hi, ps);
        if (r.value > best.acquisition) best = {embed(r.x), r.value};
    }
    return best;
}

}  // namespace

Proposal maximizeAcquisition(const GpModel& model, const AcquisitionSpec& spec, const SubspaceMask& mask,
                             std::uint64_t seed, const AcquisitionOptions& opts) {
    return maximizeExcluding(model, spec, mask, seed, opts, {});
}

std::vector<Proposal> proposeBatch(const GpModel& model, const AcquisitionSpec& spec, const SubspaceMask& mask,
                                   Index batchSize, std::uint64_t seed, const AcquisitionOptions& opts) {
    if (batchSize < 1) fail(ErrorKind::Config, "batch size must be at least 1");
    std::vector<Proposal> batch;
    std::vector<VectorXd> taken;
    GpModel current = model;
    for (Index b = 0; b < batchSize; ++b) {
        Proposal p = maximizeExcluding(current, spec, mask, seed, opts, taken);
        taken.push_back(p.point);
        batch.push_back(p);
        if (b + 1 < batchSize) current = current.withObservation(p.point, current.predict(p.point).mean);
    }
    return batch;
}

SubspaceMask fixNonInfluential(const Dataset& data, SubspaceMask mask, Index topK) {
    if (topK < 1) fail(ErrorKind::Config, "topK must be at least 1");
    if (topK > data.size())
        fail(ErrorKind::Size, "topK = " + std::to_string(topK) + " exceeds the dataset size " +
                                  std::to_string(data.size()));
    if (data.dims() != mask.dims()) fail(ErrorKind::Size, "mask dimension does not match the dataset");
    std::vector<Index> order(std::size_t(data.size()));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return data[a].response > data[b].response; });
    for (Index n = 0; n < mask.dims(); ++n) {
        if (mask.isActive(n)) continue;
        double s = 0.0;
        for (Index k = 0; k < topK; ++k) s += data[order[std::size_t(k)]].unit(n);
        mask.fixedValues(n) = s / double(topK);
    }
    return mask;
}

namespace {

nlohmann::json rows(const MatrixXd& M) {
    nlohmann::json out = nlohmann::json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        std::vector<double> r(std::size_t(M.cols()));
        for (Index j = 0; j < M.cols(); ++j) r[std::size_t(j)] = M(i, j);
        out.push_back(r);
    }
    return out;
}

MatrixXd matrixFromRows(const nlohmann::json& j) {
    const auto r = j.get<std::vector<std::vector<double>>>();
    MatrixXd M(Index(r.size()), r.empty() ? 0 : Index(r.front().size()));
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (Index(r[i].size()) != M.cols()) fail(ErrorKind::Io, "ragged matrix in BO record");
        for (std::size_t k = 0; k < r[i].size(); ++k) M(Index(i), Index(k)) = r[i][k];
    }
    return M;
}

std::vector<double> vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd vecFrom(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), Index(v.size()));
}

std::string utcNow() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

nlohmann::json toJson(const BoRecord& r) {
    return {{"iteration", r.iteration},
            {"stage", r.stage},
            {"phase", name(r.phase)},
            {"beta", r.beta},
            {"unit", rows(r.unit)},
            {"physical", rows(r.physical)},
            {"acquisitionValues", vec(r.acquisitionValues)},
            {"objectiveValues", vec(r.objectiveValues)},
            {"bestSoFar", r.bestSoFar},
            {"timestamp", r.timestamp}};
}

BoRecord boRecordFromJson(const nlohmann::json& j) {
    BoRecord r;
    r.iteration = j.at("iteration").get<int>();
    r.stage = j.at("stage").get<int>();
    r.phase = phaseFromName(j.at("phase").get<std::string>());
    r.beta = j.at("beta").get<double>();
    r.unit = matrixFromRows(j.at("unit"));
    r.physical = matrixFromRows(j.at("physical"));
    r.acquisitionValues = vecFrom(j.at("acquisitionValues"));
    r.objectiveValues = vecFrom(j.at("objectiveValues"));
    r.bestSoFar = j.at("bestSoFar").get<double>();
    r.timestamp = j.value("timestamp", "");
    return r;
}

BatchObjective pointwise(std::function<double(const VectorXd&)> f) {
    return [f = std::move(f)](const MatrixXd&, const MatrixXd& physical, MatrixXd*) {
        VectorXd y(physical.rows());
        for (Index i = 0; i < physical.rows(); ++i) y(i) = f(physical.row(i).transpose());
        return y;
    };
}

Dataset BoState::trainingSet() const {
    return trainOnValidation ? data : data.filter({Partition::Training, Partition::Adaptive});
}

void evaluateAndAppend(BoState& state, const BoContext& ctx, const BatchObjective& objective, const MatrixXd& unit,
                       Partition partition, int stage) {
    const Index B = unit.rows();
    if (state.budgetUsed + B > state.budget)
        fail(ErrorKind::Budget, "evaluation budget exhausted: " + std::to_string(state.budgetUsed) + " used of " +
                                    std::to_string(state.budget) + ", " + std::to_string(B) + " requested");
    if (unit.cols() != ctx.inputs.dims()) fail(ErrorKind::Size, "design dimension does not match the input model");
    MatrixXd physical(B, unit.cols());
    for (Index i = 0; i < B; ++i) physical.row(i) = ctx.inputs.toPhysical(unit.row(i).transpose()).transpose();
    MatrixXd realized = MatrixXd::Constant(B, unit.cols(), std::numeric_limits<double>::quiet_NaN());
    const VectorXd y = objective(unit, physical, &realized);
    if (y.size() != B) fail(ErrorKind::Io, "objective returned the wrong number of responses");
    for (Index i = 0; i < B; ++i) {
        if (!std::isfinite(y(i))) fail(ErrorKind::Data, "objective returned a non-finite response");
        Sample s;
        s.unit = ctx.inputs.snapDiscrete(unit.row(i).transpose());
        s.physical = physical.row(i).transpose();
        const Index reported = (realized.row(i).array() == realized.row(i).array()).count();
        if (reported == unit.cols()) {
            s.physical = realized.row(i).transpose();
            s.unit = ctx.inputs.toUnit(s.physical);
        } else if (reported != 0) {
            fail(ErrorKind::Io, "objective reported realized values for only some inputs");
        }
        s.response = y(i);
        s.transformed = forwardTransform(state.transform, y(i));
        s.partition = partition;
        s.stage = stage;
        state.data.push_back(std::move(s));
        ++state.budgetUsed;
        if (y(i) > state.bestSoFar) {
            state.bestSoFar = y(i);
            state.bestIndex = state.data.size() - 1;
        }
    }
}

namespace {
const std::set<Family> kOutputFamilies{Family::Normal, Family::Uniform, Family::Beta, Family::Gamma};
}

void refitOutputTransform(BoState& state) {
    const VectorXd y = state.trainingSet().responses();
    if (y.size() < 10 || y.maxCoeff() == y.minCoeff()) return;
    state.transform.fitted =
        fitDistributionBic(std::span<const double>(y.data(), std::size_t(y.size())), kOutputFamilies, state.transform.support)
            .best;
    for (auto& s : state.data.samples()) s.transformed = forwardTransform(state.transform, s.response);
}

BoRecord boStep(BoState& state, const BoContext& ctx, const BatchObjective& objective, const AcquisitionSpec& spec,
                Index batchSize, const SubspaceMask& mask, int stage, std::uint64_t seed) {
    if (batchSize < 1) fail(ErrorKind::Config, "batch size must be at least 1");
    if (state.budgetUsed + batchSize > state.budget)
        fail(ErrorKind::Budget, "evaluation budget exhausted: " + std::to_string(state.budget - state.budgetUsed) +
                                    " left, batch of " + std::to_string(batchSize) + " requested");
    if (ctx.refitOutput) refitOutputTransform(state);
    GpFitOptions gpOpts = ctx.gp;
    gpOpts.seed = seed;
    return boStepWithModel(state, ctx, objective, spec, batchSize, mask, stage, seed,
                           fitGp(state.trainingSet(), ctx.kernel, gpOpts));
}

BoRecord boStepWithModel(BoState& state, const BoContext& ctx, const BatchObjective& objective,
                         const AcquisitionSpec& spec, Index batchSize, const SubspaceMask& mask, int stage,
                         std::uint64_t seed, const GpModel& gp) {
    if (batchSize < 1) fail(ErrorKind::Config, "batch size must be at least 1");
    if (state.budgetUsed + batchSize > state.budget)
        fail(ErrorKind::Budget, "evaluation budget exhausted: " + std::to_string(state.budget - state.budgetUsed) +
                                    " left, batch of " + std::to_string(batchSize) + " requested");
    const auto batch = proposeBatch(gp, spec, mask, batchSize, seed + 1, ctx.acquisition);

    MatrixXd U(batchSize, mask.dims());
    BoRecord r;
    r.acquisitionValues.resize(batchSize);
    for (Index b = 0; b < batchSize; ++b) {
        U.row(b) = batch[std::size_t(b)].point.transpose();
        r.acquisitionValues(b) = batch[std::size_t(b)].acquisition;
    }
    const Index first = state.data.size();
    evaluateAndAppend(state, ctx, objective, U, Partition::Adaptive, stage);

    r.iteration = ++state.iteration;
    r.stage = stage;
    r.phase = spec.phase;
    r.beta = spec.beta;
    r.unit.resize(batchSize, mask.dims());
    r.physical.resize(batchSize, mask.dims());
    r.objectiveValues.resize(batchSize);
    for (Index b = 0; b < batchSize; ++b) {
        const auto& s = state.data[first + b];
        r.unit.row(b) = s.unit.transpose();
        r.physical.row(b) = s.physical.transpose();
        r.objectiveValues(b) = s.response;
    }
    r.bestSoFar = state.bestSoFar;
    r.timestamp = utcNow();
    state.log.push_back(r);
    return r;
}

}  // namespace dsopt
