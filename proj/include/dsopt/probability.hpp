#pragma once

#include "dsopt/core.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace dsopt {

enum class Family { Uniform, Normal, Beta, Gamma, DiscreteUniform };

const char* name(Family f);
Family familyFromName(const std::string& s);

struct UniformDist {
    double lo = 0.0;
    double hi = 1.0;
};
struct NormalDist {
    double mean = 0.0;
    double std = 1.0;
};
/// Beta law location-scaled onto [lo, hi].
struct BetaDist {
    double alpha = 1.0;
    double beta = 1.0;
    double lo = 0.0;
    double hi = 1.0;
};
/// Gamma law shifted to start at `loc`.
struct GammaDist {
    double shape = 1.0;
    double rate = 1.0;
    double loc = 0.0;
};
/// Integers lo..hi; normalized through the continuous Uniform(lo, hi) CDF.
struct DiscreteUniformDist {
    int lo = 0;
    int hi = 1;
};

using MarginalDistribution = std::variant<UniformDist, NormalDist, BetaDist, GammaDist, DiscreteUniformDist>;

Family family(const MarginalDistribution& d);
/// Number of fitted parameters (the k of the BIC).
int parameterCount(const MarginalDistribution& d);
/// Throws ErrorKind::Domain when the parameters are outside their domain.
void validate(const MarginalDistribution& d);

/// Support endpoints; infinite for unbounded sides.
double supportLower(const MarginalDistribution& d);
double supportUpper(const MarginalDistribution& d);
double mean(const MarginalDistribution& d);

double pdf(const MarginalDistribution& d, double x);
/// Log density; samples on or outside a bounded support edge use the density at the
/// nearest interior point, so likelihoods stay finite.
double logPdf(const MarginalDistribution& d, double x);
double cdf(const MarginalDistribution& d, double x);
/// 1 - cdf, computed without cancellation in the upper tail.
double survival(const MarginalDistribution& d, double x);
/// Quantile for u in (0,1).
double inverseCdf(const MarginalDistribution& d, double u);
/// Quantile from the upper-tail probability q = 1 - u in (0,1).
double inverseSurvival(const MarginalDistribution& d, double q);

/// Rounds DiscreteUniform values to the nearest admissible integer; identity otherwise.
double roundToSupport(const MarginalDistribution& d, double x);

/// Draws by inversion.
double sample(const MarginalDistribution& d, std::mt19937_64& rng);

nlohmann::json toJson(const MarginalDistribution& d);
MarginalDistribution distributionFromJson(const nlohmann::json& j);

/// Independent marginals; the joint CDF is the product of the marginal CDFs.
struct InputModel {
    std::vector<MarginalDistribution> marginals;
    std::vector<std::string> names;

    Index dims() const { return static_cast<Index>(marginals.size()); }
    /// CDF-normalizes a physical point.
    VectorXd toUnit(const VectorXd& physical) const;
    /// Inverse-CDF map; discrete dims are rounded when `roundDiscrete` is set.
    VectorXd toPhysical(const VectorXd& unit, bool roundDiscrete = true) const;
    /// Moves discrete coordinates onto the unit value of the integer they round to.
    VectorXd snapDiscrete(const VectorXd& unit) const;
};

nlohmann::json toJson(const InputModel& m);
InputModel inputModelFromJson(const nlohmann::json& j);

/// Known bounds of a variable. Bounded families take them as their support instead of
/// estimating one; the Gamma location stays above `lo`.
struct Support {
    double lo = 0.0;
    double hi = 1.0;
};

/// CDF followed by logit, mapping a bounded response onto the real line.
struct OutputTransform {
    MarginalDistribution fitted = UniformDist{0.0, 1.0};
    /// Known response bounds used when the distribution is refitted.
    std::optional<Support> support;
};

inline constexpr double kTransformClamp = 1e-12;

/// z = logit(F(eta)). Probabilities closer than 1e-12 to 0 or 1 are clamped and
/// `clamped` (when given) is set.
double forwardTransform(const OutputTransform& t, double eta, bool* clamped = nullptr);
/// eta = F^{-1}(sigmoid(z)).
double inverseTransform(const OutputTransform& t, double z);

struct BicFit {
    MarginalDistribution best;
    std::map<Family, double> bic;
    std::map<Family, MarginalDistribution> fitted;
    std::map<Family, double> logLikelihood;
};

/// Maximum-likelihood fit of each candidate family followed by selection of the
/// lowest BIC = k ln(n) - 2 ln(L). Requires at least 10 finite, non-constant samples.
/// With a known support, the support parameters do not count towards k.
BicFit fitDistributionBic(std::span<const double> samples,
                          const std::set<Family>& candidates = {Family::Normal, Family::Uniform, Family::Beta,
                                                                Family::Gamma},
                          const std::optional<Support>& support = std::nullopt);

/// Maximum-likelihood fit of one family (used by fitDistributionBic).
MarginalDistribution fitFamily(std::span<const double> samples, Family family,
                               const std::optional<Support>& support = std::nullopt);

double logLikelihood(const MarginalDistribution& d, std::span<const double> samples);

}  // namespace dsopt
