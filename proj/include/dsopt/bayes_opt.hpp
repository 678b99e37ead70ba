#pragma once

#include "dsopt/core.hpp"
#include "dsopt/gp.hpp"
#include "dsopt/probability.hpp"
#include "dsopt/sensitivity.hpp"

#include <json.hpp>

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace dsopt {

enum class Phase { Exploration, Balanced, Exploitation };

const char* name(Phase p);
Phase phaseFromName(const std::string& s);
/// 2, 1 and 0.5.
double defaultBeta(Phase p);

struct AcquisitionSpec {
    double beta = 2.0;
    Phase phase = Phase::Exploration;

    static AcquisitionSpec forPhase(Phase p) { return {defaultBeta(p), p}; }
};

/// mu + beta * sigma.
double ucb(double mean, double stddev, double beta);

struct AcquisitionOptions {
    Index poolSize = 4096;
    Index refineStarts = 8;
    int refineIterations = 200;
    /// Batch members closer than this (Euclidean, unit cube) are rejected.
    double minSeparation = 1e-3;
};

struct Proposal {
    VectorXd point;  ///< unit hypercube
    double acquisition = 0.0;
};

/// UCB maximizer over the active coordinates: scores a shifted Halton pool, then refines the
/// best pool points by pattern search. Inactive coordinates are copied from the mask.
Proposal maximizeAcquisition(const GpModel& model, const AcquisitionSpec& spec, const SubspaceMask& mask,
                             std::uint64_t seed, const AcquisitionOptions& opts = {});

/// Sequential constant-liar batch: each selected point is added to the model with its
/// predictive mean before the next one is chosen.
std::vector<Proposal> proposeBatch(const GpModel& model, const AcquisitionSpec& spec, const SubspaceMask& mask,
                                   Index batchSize, std::uint64_t seed, const AcquisitionOptions& opts = {});

/// Sets the fixed values of the inactive dims to their mean unit coordinate over the
/// `topK` best designs of `data`.
SubspaceMask fixNonInfluential(const Dataset& data, SubspaceMask mask, Index topK);

struct BoRecord {
    int iteration = 0;
    int stage = 0;
    Phase phase = Phase::Exploration;
    double beta = 0.0;
    MatrixXd unit;
    MatrixXd physical;
    VectorXd acquisitionValues;
    VectorXd objectiveValues;
    double bestSoFar = 0.0;
    std::string timestamp;
};

nlohmann::json toJson(const BoRecord& r);
BoRecord boRecordFromJson(const nlohmann::json& j);

/// Evaluates rows of `physical` (whose unit coordinates are `unit`). Rows of `realized`
/// arrive NaN-filled; an objective that reports realized physical inputs writes them there.
using BatchObjective = std::function<VectorXd(const MatrixXd& unit, const MatrixXd& physical, MatrixXd* realized)>;

/// Wraps a pointwise objective on physical inputs.
BatchObjective pointwise(std::function<double(const VectorXd&)> f);

struct BoContext {
    InputModel inputs;
    KernelFamily kernel = KernelFamily::RBF;
    GpFitOptions gp;
    AcquisitionOptions acquisition;
    /// Refit the output distribution to the surrogate training responses before every GP fit.
    bool refitOutput = true;
};

struct BoState {
    Dataset data;
    OutputTransform transform;
    Index budget = 0;
    Index budgetUsed = 0;
    double bestSoFar = -std::numeric_limits<double>::infinity();
    Index bestIndex = -1;
    int iteration = 0;
    /// Whether validation samples train the surrogate.
    bool trainOnValidation = false;
    std::vector<BoRecord> log;

    Dataset trainingSet() const;
};

/// Maps `unit` to physical space, evaluates, appends the samples and updates budget and best.
/// Realized inputs replace both coordinates of the stored sample. Throws Budget when the batch
/// does not fit the remaining budget.
void evaluateAndAppend(BoState& state, const BoContext& ctx, const BatchObjective& objective, const MatrixXd& unit,
                       Partition partition, int stage);

/// BIC refit of the output distribution on the training responses; recomputes every
/// stored transformed response.
void refitOutputTransform(BoState& state);

/// One BO iteration: refit transform and GP on the training set, propose a batch, evaluate it.
BoRecord boStep(BoState& state, const BoContext& ctx, const BatchObjective& objective, const AcquisitionSpec& spec,
                Index batchSize, const SubspaceMask& mask, int stage, std::uint64_t seed);
/// Same, with a surrogate already fitted on the current training set.
BoRecord boStepWithModel(BoState& state, const BoContext& ctx, const BatchObjective& objective,
                         const AcquisitionSpec& spec, Index batchSize, const SubspaceMask& mask, int stage,
                         std::uint64_t seed, const GpModel& gp);

}  // namespace dsopt
