#pragma once

#include "dsopt/core.hpp"
#include "dsopt/pce.hpp"
#include "dsopt/probability.hpp"

#include <json.hpp>

#include <functional>
#include <set>
#include <string>
#include <vector>

namespace dsopt {

struct SobolResult {
    VectorXd firstOrder;
    VectorXd totalOrder;
    double variance = 0.0;
    std::string scheme;

    Index dims() const { return firstOrder.size(); }
};

/// Sum of squared non-constant PCE coefficients.
double pceVariance(const PceModel& model);

/// First- and total-order indices by post-processing PCE coefficients.
/// Throws Data when the model has zero variance.
SobolResult sobolFromPce(const PceModel& model);

/// Active dimensions and the unit-cube values held by the inactive ones.
struct SubspaceMask {
    std::vector<bool> active;
    VectorXd fixedValues;

    static SubspaceMask full(Index N);
    Index dims() const { return Index(active.size()); }
    Index activeCount() const;
    std::vector<Index> activeDims() const;
    bool isActive(Index n) const { return active[std::size_t(n)]; }
    /// Overwrites the inactive coordinates of `u` with the fixed values.
    void apply(VectorXd& u) const;
};

nlohmann::json toJson(const SubspaceMask& m);
SubspaceMask subspaceMaskFromJson(const nlohmann::json& j);

/// Keeps every dim whose total-order index reaches `threshold` in any of the results, or lies
/// above (1 - borderlineMargin) * threshold in any of them, plus the mandatory dims.
/// Inactive dims start fixed at 0.5. Throws Selection when nothing is kept.
SubspaceMask selectInfluentialSubspace(const std::vector<SobolResult>& results, double threshold,
                                       const std::set<Index>& mandatory = {}, double borderlineMargin = 0.2);

using PointObjective = std::function<double(const VectorXd&)>;

/// Saltelli pick-freeze estimates (Saltelli 2010 first order, Jansen total order) from
/// (N + 2) * nBase evaluations of `objective` at physical points of `inputs`.
/// Estimates are clipped to [0, 1] with total >= first.
SobolResult sobolMonteCarlo(const PointObjective& objective, const InputModel& inputs, Index nBase,
                            std::uint64_t seed);

nlohmann::json toJson(const SobolResult& r, const std::vector<std::string>& names = {});
/// Table with columns dim, name, S_F, S_T, scheme; one block per result.
void writeSobolCsv(const std::vector<SobolResult>& results, const std::vector<std::string>& names,
                   const std::string& path);

}  // namespace dsopt
