#pragma once

#include "dsopt/bayes_opt.hpp"
#include "dsopt/design.hpp"
#include "dsopt/pce.hpp"
#include "dsopt/sensitivity.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dsopt {

/// Ordered key-value pairs; `set` replaces an existing key in place.
struct KeyValues {
    std::vector<std::pair<std::string, std::string>> items;

    void set(const std::string& key, const std::string& value);
    const std::string* find(const std::string& key) const;
};

/// One row of a stage schedule: `batches` BO iterations of `batchSize` points each.
struct ScheduleEntry {
    AcquisitionSpec acquisition;
    Index batches = 1;
    Index batchSize = 1;

    Index evaluations() const { return batches * batchSize; }
};

/// "Exploration:2:1x15, Balanced:1:3x5" (beta may be omitted for the phase default).
std::vector<ScheduleEntry> parseSchedule(const std::string& text);
std::string formatSchedule(const std::vector<ScheduleEntry>& s);

struct WorkflowConfig {
    std::string objective = "TurbineEfficiencyProxy";
    Index objectiveDims = 0;
    std::string externalCommand;
    /// Empty: the objective's own input model.
    InputModel inputs;

    Index initialSize = 200;
    Index validationSize = 32;
    Index budget = 330;
    std::vector<ScheduleEntry> stage1, stage2, stage4;

    double threshold = 0.05;
    Index topK = 10;
    std::set<Index> mandatoryDims;
    std::vector<BasisScheme> gsaSchemes{BasisScheme::TD2, BasisScheme::SAPCE};

    std::uint64_t seed = 1;
    KernelFamily kernel = KernelFamily::RBF;
    int gpStarts = 8;
    bool refitOutput = true;
    /// Known response bounds; defaults to (0, 1) for the turbine proxy.
    std::optional<Support> outputSupport;
    /// Input dims whose marginals are refitted (BIC) on the evaluated designs at stage boundaries.
    std::vector<Index> refitInputs;
    bool logSurrogates = true;
    int larDegree = 3;
    int sapceAlphaCap = 3;
    AnnealSchedule design;
    std::string outDir = "out";

    /// Key-value pairs the config was built from, overrides included.
    KeyValues raw;
};

/// Builds a config from key-value pairs on top of the defaults. Throws Config on unknown keys or
/// malformed values and Budget when the schedule does not fit the budget.
/// Dimensions of the input model follow the order of the input.<name> keys.
WorkflowConfig configFromPairs(const KeyValues& pairs);
/// Parses "key = value" lines; '#' starts a comment. A repeated key keeps its last value.
KeyValues parseKeyValues(const std::string& text);
WorkflowConfig loadConfig(const std::string& path, const KeyValues& overrides = {});

/// Input model and batch objective described by the config.
struct ObjectiveBinding {
    InputModel inputs;
    BatchObjective objective;
};
ObjectiveBinding bindObjective(const WorkflowConfig& config);

enum class Stage { S1_BOWithValidation, S2_BOFull, S3_Reduction, S4_BOReduced, Done };

const char* name(Stage s);
Stage stageFromName(const std::string& s);

struct SurrogateMetric {
    int step = 0;
    Index trainingSize = 0;
    std::string model;
    double mape = 0.0;
    double maxApe = 0.0;
};

struct WorkflowState {
    /// Next stage to run.
    Stage stage = Stage::S1_BOWithValidation;
    BoState bo;
    InputModel inputs;
    SubspaceMask mask;
    std::vector<SobolResult> sobol;
    std::vector<SurrogateMetric> metrics;
    /// Best response and dataset size at the end of stages 1 to 4 (index 0 unused).
    std::vector<double> stageBest = std::vector<double>(5, std::numeric_limits<double>::quiet_NaN());
    std::vector<Index> stageEnd = std::vector<Index>(5, 0);

    const Dataset& data() const { return bo.data; }
    /// Best design in physical coordinates.
    VectorXd bestPhysical() const;
};

nlohmann::json toJson(const WorkflowState& s);
WorkflowState workflowStateFromJson(const nlohmann::json& j);
void saveState(const WorkflowState& s, const std::string& path);
WorkflowState loadState(const std::string& path);

/// Called after every batch of evaluations.
using ProgressHook = std::function<void(const WorkflowState&)>;

/// Initial MaxPro design, held-out random validation set, BO in the full space with surrogate
/// MAPE/MaxAPE on the validation set logged at every enrichment step.
WorkflowState runStage1(const WorkflowConfig& config, const ObjectiveBinding& objective,
                        const ProgressHook& hook = {});
/// Validation samples join the training set; BO continues in the full space.
void runStage2(WorkflowState& state, const WorkflowConfig& config, const ObjectiveBinding& objective,
               const ProgressHook& hook = {});
/// PCE-based Sobol' indices on the transformed response, subspace selection and fixing of the rest.
void runStage3(WorkflowState& state, const WorkflowConfig& config);
/// BO in the influential subspace until the budget is spent.
void runStage4(WorkflowState& state, const WorkflowConfig& config, const ObjectiveBinding& objective,
               const ProgressHook& hook = {});
/// Runs the next stage of `state`.
void runNextStage(WorkflowState& state, const WorkflowConfig& config, const ObjectiveBinding& objective,
                  const ProgressHook& hook = {});
/// Runs the remaining stages (all of them when `state` is null).
WorkflowState runWorkflow(const WorkflowConfig& config, const ObjectiveBinding& objective,
                          const WorkflowState* resume = nullptr, const ProgressHook& hook = {});

/// Surrogate MAPE/MaxAPE of GP (RBF, Matern-3/2, Matern-5/2) and PCE (TD1, TD2, LAR, SAPCE)
/// fits on the training set, scored on the validation set in response units.
std::vector<SurrogateMetric> surrogateMetrics(const BoState& bo, const WorkflowConfig& config, int step,
                                              const GpModel* rbf = nullptr);

/// Sobol' results of TD2, SAPCE and LAR fits on the current training set.
std::vector<SobolResult> pceSensitivities(const BoState& bo, const WorkflowConfig& config);

void writeDatasetCsv(const Dataset& data, const std::vector<std::string>& names, const std::string& path,
                     Index firstRow = 0, bool append = false);
Dataset readDatasetCsv(const std::string& path);

/// surrogate_metrics.csv, sobol.csv, histogram.csv, trajectory.csv, stages.csv, best_design.csv.
void emitReport(const WorkflowState& state, const std::string& dir);

}  // namespace dsopt
