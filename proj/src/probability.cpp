#include "dsopt/probability.hpp"

#include "dsopt/optim.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dsopt {

namespace bm = boost::math;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bm::normal_distribution<double> boostOf(const NormalDist& d) { return {d.mean, d.std}; }
bm::beta_distribution<double> boostOf(const BetaDist& d) { return {d.alpha, d.beta}; }
bm::gamma_distribution<double> boostOf(const GammaDist& d) { return {d.shape, 1.0 / d.rate}; }

void requireProbability(double u) {
    if (!(u > 0.0 && u < 1.0)) fail(ErrorKind::Domain, "probability must lie in (0,1)");
}

// Offset used to keep log-densities finite at bounded support edges.
constexpr double kEdge = 1e-12;

}  // namespace

const char* name(Family f) {
    switch (f) {
    case Family::Uniform:
        return "Uniform";
    case Family::Normal:
        return "Normal";
    case Family::Beta:
        return "Beta";
    case Family::Gamma:
        return "Gamma";
    case Family::DiscreteUniform:
        return "DiscreteUniform";
    }
    return "Uniform";
}

Family familyFromName(const std::string& s) {
    for (Family f : {Family::Uniform, Family::Normal, Family::Beta, Family::Gamma, Family::DiscreteUniform})
        if (s == name(f)) return f;
    fail(ErrorKind::Config, "unknown distribution family '" + s + "'");
}

Family family(const MarginalDistribution& d) { return static_cast<Family>(d.index()); }

int parameterCount(const MarginalDistribution& d) {
    return std::visit(Overloaded{[](const UniformDist&) { return 2; }, [](const NormalDist&) { return 2; },
                                 [](const BetaDist&) { return 4; }, [](const GammaDist&) { return 3; },
                                 [](const DiscreteUniformDist&) { return 2; }},
                      d);
}

void validate(const MarginalDistribution& d) {
    const bool ok = std::visit(
        Overloaded{[](const UniformDist& p) { return std::isfinite(p.lo) && std::isfinite(p.hi) && p.lo < p.hi; },
                   [](const NormalDist& p) { return std::isfinite(p.mean) && p.std > 0.0 && std::isfinite(p.std); },
                   [](const BetaDist& p) {
                       return p.alpha > 0.0 && p.beta > 0.0 && std::isfinite(p.alpha) && std::isfinite(p.beta) &&
                              std::isfinite(p.lo) && std::isfinite(p.hi) && p.lo < p.hi;
                   },
                   [](const GammaDist& p) {
                       return p.shape > 0.0 && p.rate > 0.0 && std::isfinite(p.shape) && std::isfinite(p.rate) &&
                              std::isfinite(p.loc);
                   },
                   [](const DiscreteUniformDist& p) { return p.lo < p.hi; }},
        d);
    if (!ok) fail(ErrorKind::Domain, std::string("invalid parameters for ") + name(family(d)) + " distribution");
}

double supportLower(const MarginalDistribution& d) {
    return std::visit(Overloaded{[](const UniformDist& p) { return p.lo; }, [](const NormalDist&) { return -kInf; },
                                 [](const BetaDist& p) { return p.lo; }, [](const GammaDist& p) { return p.loc; },
                                 [](const DiscreteUniformDist& p) { return double(p.lo); }},
                      d);
}

double supportUpper(const MarginalDistribution& d) {
    return std::visit(Overloaded{[](const UniformDist& p) { return p.hi; }, [](const NormalDist&) { return kInf; },
                                 [](const BetaDist& p) { return p.hi; }, [](const GammaDist&) { return kInf; },
                                 [](const DiscreteUniformDist& p) { return double(p.hi); }},
                      d);
}

double mean(const MarginalDistribution& d) {
    validate(d);
    return std::visit(
        Overloaded{[](const UniformDist& p) { return 0.5 * (p.lo + p.hi); }, [](const NormalDist& p) { return p.mean; },
                   [](const BetaDist& p) { return p.lo + (p.hi - p.lo) * p.alpha / (p.alpha + p.beta); },
                   [](const GammaDist& p) { return p.loc + p.shape / p.rate; },
                   [](const DiscreteUniformDist& p) { return 0.5 * (p.lo + p.hi); }},
        d);
}

double pdf(const MarginalDistribution& d, double x) {
    validate(d);
    if (x < supportLower(d) || x > supportUpper(d)) return 0.0;
    return std::exp(logPdf(d, x));
}

double logPdf(const MarginalDistribution& d, double x) {
    validate(d);
    return std::visit(
        Overloaded{[](const UniformDist& p) { return -std::log(p.hi - p.lo); },
                   [](const DiscreteUniformDist& p) { return -std::log(double(p.hi - p.lo)); },
                   [x](const NormalDist& p) {
                       const double t = (x - p.mean) / p.std;
                       return -0.5 * t * t - std::log(p.std) - 0.5 * std::log(2.0 * M_PI);
                   },
                   [x](const BetaDist& p) {
                       const double w = p.hi - p.lo;
                       const double t = std::clamp((x - p.lo) / w, kEdge, 1.0 - kEdge);
                       return (p.alpha - 1.0) * std::log(t) + (p.beta - 1.0) * std::log1p(-t) -
                              (std::lgamma(p.alpha) + std::lgamma(p.beta) - std::lgamma(p.alpha + p.beta)) -
                              std::log(w);
                   },
                   [x](const GammaDist& p) {
                       const double t = std::max(x - p.loc, kEdge);
                       return (p.shape - 1.0) * std::log(t) - p.rate * t + p.shape * std::log(p.rate) -
                              std::lgamma(p.shape);
                   }},
        d);
}

double cdf(const MarginalDistribution& d, double x) {
    validate(d);
    if (std::isnan(x)) fail(ErrorKind::Domain, "cdf argument is NaN");
    if (x <= supportLower(d)) return 0.0;
    if (x >= supportUpper(d)) return 1.0;
    return std::visit(Overloaded{[x](const UniformDist& p) { return (x - p.lo) / (p.hi - p.lo); },
                                 [x](const DiscreteUniformDist& p) { return (x - p.lo) / double(p.hi - p.lo); },
                                 [x](const NormalDist& p) { return bm::cdf(boostOf(p), x); },
                                 [x](const BetaDist& p) { return bm::cdf(boostOf(p), (x - p.lo) / (p.hi - p.lo)); },
                                 [x](const GammaDist& p) { return bm::cdf(boostOf(p), x - p.loc); }},
                      d);
}

double survival(const MarginalDistribution& d, double x) {
    validate(d);
    if (std::isnan(x)) fail(ErrorKind::Domain, "cdf argument is NaN");
    if (x <= supportLower(d)) return 1.0;
    if (x >= supportUpper(d)) return 0.0;
    return std::visit(
        Overloaded{[x](const UniformDist& p) { return (p.hi - x) / (p.hi - p.lo); },
                   [x](const DiscreteUniformDist& p) { return (p.hi - x) / double(p.hi - p.lo); },
                   [x](const NormalDist& p) { return bm::cdf(bm::complement(boostOf(p), x)); },
                   [x](const BetaDist& p) { return bm::cdf(bm::complement(boostOf(p), (x - p.lo) / (p.hi - p.lo))); },
                   [x](const GammaDist& p) { return bm::cdf(bm::complement(boostOf(p), x - p.loc)); }},
        d);
}

double inverseCdf(const MarginalDistribution& d, double u) {
    validate(d);
    requireProbability(u);
    return std::visit(Overloaded{[u](const UniformDist& p) { return p.lo + u * (p.hi - p.lo); },
                                 [u](const DiscreteUniformDist& p) { return p.lo + u * double(p.hi - p.lo); },
                                 [u](const NormalDist& p) { return bm::quantile(boostOf(p), u); },
                                 [u](const BetaDist& p) { return p.lo + (p.hi - p.lo) * bm::quantile(boostOf(p), u); },
                                 [u](const GammaDist& p) { return p.loc + bm::quantile(boostOf(p), u); }},
                      d);
}

double inverseSurvival(const MarginalDistribution& d, double q) {
    validate(d);
    requireProbability(q);
    return std::visit(
        Overloaded{[q](const UniformDist& p) { return p.hi - q * (p.hi - p.lo); },
                   [q](const DiscreteUniformDist& p) { return p.hi - q * double(p.hi - p.lo); },
                   [q](const NormalDist& p) { return bm::quantile(bm::complement(boostOf(p), q)); },
                   [q](const BetaDist& p) {
                       return p.lo + (p.hi - p.lo) * bm::quantile(bm::complement(boostOf(p), q));
                   },
                   [q](const GammaDist& p) { return p.loc + bm::quantile(bm::complement(boostOf(p), q)); }},
        d);
}

double roundToSupport(const MarginalDistribution& d, double x) {
    if (const auto* p = std::get_if<DiscreteUniformDist>(&d))
        return std::clamp(std::round(x), double(p->lo), double(p->hi));
    return x;
}

double sample(const MarginalDistribution& d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    if (family(d) == Family::DiscreteUniform) {
        const auto& p = std::get<DiscreteUniformDist>(d);
        return p.lo + std::min<double>(std::floor(u * (p.hi - p.lo + 1)), p.hi - p.lo);
    }
    return inverseCdf(d, u);
}

nlohmann::json toJson(const MarginalDistribution& d) {
    nlohmann::json params = std::visit(
        Overloaded{[](const UniformDist& p) { return nlohmann::json{{"lo", p.lo}, {"hi", p.hi}}; },
                   [](const NormalDist& p) { return nlohmann::json{{"mean", p.mean}, {"std", p.std}}; },
                   [](const BetaDist& p) {
                       return nlohmann::json{{"alpha", p.alpha}, {"beta", p.beta}, {"lo", p.lo}, {"hi", p.hi}};
                   },
                   [](const GammaDist& p) {
                       return nlohmann::json{{"shape", p.shape}, {"rate", p.rate}, {"loc", p.loc}};
                   },
                   [](const DiscreteUniformDist& p) { return nlohmann::json{{"lo", p.lo}, {"hi", p.hi}}; }},
        d);
    return {{"family", name(family(d))}, {"params", params}};
}

MarginalDistribution distributionFromJson(const nlohmann::json& j) {
    try {
        const auto& p = j.at("params");
        MarginalDistribution d;
        switch (familyFromName(j.at("family").get<std::string>())) {
        case Family::Uniform:
            d = UniformDist{p.at("lo").get<double>(), p.at("hi").get<double>()};
            break;
        case Family::Normal:
            d = NormalDist{p.at("mean").get<double>(), p.at("std").get<double>()};
            break;
        case Family::Beta:
            d = BetaDist{p.at("alpha").get<double>(), p.at("beta").get<double>(), p.at("lo").get<double>(),
                         p.at("hi").get<double>()};
            break;
        case Family::Gamma:
            d = GammaDist{p.at("shape").get<double>(), p.at("rate").get<double>(), p.at("loc").get<double>()};
            break;
        case Family::DiscreteUniform:
            d = DiscreteUniformDist{p.at("lo").get<int>(), p.at("hi").get<int>()};
            break;
        }
        validate(d);
        return d;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("malformed distribution descriptor: ") + e.what());
    }
}

VectorXd InputModel::toUnit(const VectorXd& physical) const {
    if (physical.size() != dims()) fail(ErrorKind::Size, "point dimension does not match input model");
    VectorXd u(dims());
    for (Index n = 0; n < dims(); ++n) u(n) = cdf(marginals[static_cast<std::size_t>(n)], physical(n));
    return u;
}

VectorXd InputModel::toPhysical(const VectorXd& unit, bool roundDiscrete) const {
    if (unit.size() != dims()) fail(ErrorKind::Size, "point dimension does not match input model");
    VectorXd x(dims());
    for (Index n = 0; n < dims(); ++n) {
        const auto& m = marginals[static_cast<std::size_t>(n)];
        const double u = std::clamp(unit(n), kTransformClamp, 1.0 - kTransformClamp);
        x(n) = inverseCdf(m, u);
        if (roundDiscrete) x(n) = roundToSupport(m, x(n));
    }
    return x;
}

VectorXd InputModel::snapDiscrete(const VectorXd& unit) const {
    if (unit.size() != dims()) fail(ErrorKind::Size, "point dimension does not match input model");
    VectorXd u = unit;
    for (Index n = 0; n < dims(); ++n) {
        const auto& m = marginals[static_cast<std::size_t>(n)];
        if (!std::holds_alternative<DiscreteUniformDist>(m)) continue;
        const double x = roundToSupport(m, inverseCdf(m, std::clamp(unit(n), kTransformClamp, 1.0 - kTransformClamp)));
        u(n) = cdf(m, x);
    }
    return u;
}

nlohmann::json toJson(const InputModel& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t n = 0; n < m.marginals.size(); ++n) {
        auto j = toJson(m.marginals[n]);
        j["name"] = n < m.names.size() ? m.names[n] : "x" + std::to_string(n + 1);
        arr.push_back(j);
    }
    return arr;
}

InputModel inputModelFromJson(const nlohmann::json& j) {
    InputModel m;
    for (const auto& e : j) {
        m.marginals.push_back(distributionFromJson(e));
        m.names.push_back(e.value("name", "x" + std::to_string(m.names.size() + 1)));
    }
    return m;
}

double forwardTransform(const OutputTransform& t, double eta, bool* clamped) {
    double u = cdf(t.fitted, eta);
    double q = survival(t.fitted, eta);
    bool hit = false;
    if (u < kTransformClamp) {
        u = kTransformClamp;
        q = 1.0 - kTransformClamp;
        hit = true;
    } else if (q < kTransformClamp) {
        q = kTransformClamp;
        u = 1.0 - kTransformClamp;
        hit = true;
    }
    if (clamped) *clamped = hit;
    return std::log(u) - std::log(q);
}

double inverseTransform(const OutputTransform& t, double z) {
    if (!std::isfinite(z)) fail(ErrorKind::Domain, "transformed value must be finite");
    constexpr double tiny = std::numeric_limits<double>::min();
    // Work from whichever tail is small so that neither probability loses precision.
    if (z <= 0.0) {
        const double e = std::exp(z);
        const double u = std::max(e / (1.0 + e), tiny);
        return inverseCdf(t.fitted, u);
    }
    const double e = std::exp(-z);
    const double q = std::max(e / (1.0 + e), tiny);
    return inverseSurvival(t.fitted, q);
}

double logLikelihood(const MarginalDistribution& d, std::span<const double> samples) {
    double ll = 0.0;
    for (double x : samples) ll += logPdf(d, x);
    return ll;
}

namespace {

struct SampleStats {
    double n, min, max, mean, var, skew;
};

SampleStats stats(std::span<const double> s) {
    SampleStats st{};
    st.n = double(s.size());
    st.min = *std::min_element(s.begin(), s.end());
    st.max = *std::max_element(s.begin(), s.end());
    st.mean = std::accumulate(s.begin(), s.end(), 0.0) / st.n;
    double m2 = 0.0, m3 = 0.0;
    for (double x : s) {
        const double d = x - st.mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    st.var = m2 / st.n;
    st.skew = st.var > 0.0 ? (m3 / st.n) / std::pow(st.var, 1.5) : 0.0;
    return st;
}

// Bounded supports are widened past the sample extremes by range/(n-1) on each side,
// the unbiased endpoint estimate, so observed extremes stay interior to the support.
double supportPadding(const SampleStats& st) { return (st.max - st.min) / (st.n - 1.0); }

MarginalDistribution fitBeta(std::span<const double> s, const SampleStats& st, const std::optional<Support>& support) {
    const double pad = supportPadding(st);
    const double lo = support ? support->lo : st.min - pad, hi = support ? support->hi : st.max + pad, w = hi - lo;
    double sumLogT = 0.0, sumLog1mT = 0.0;
    for (double x : s) {
        const double t = std::clamp((x - lo) / w, kEdge, 1.0 - kEdge);
        sumLogT += std::log(t);
        sumLog1mT += std::log1p(-t);
    }
    const double n = st.n;
    // Log-likelihood in (log alpha, log beta) without the constant -n log w.
    auto objective = [&](const VectorXd& p, VectorXd* grad) {
        const double a = std::exp(p(0)), b = std::exp(p(1));
        const double ll = (a - 1.0) * sumLogT + (b - 1.0) * sumLog1mT -
                          n * (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
        if (grad) {
            const double dab = bm::digamma(a + b);
            grad->resize(2);
            (*grad)(0) = a * (sumLogT - n * (bm::digamma(a) - dab));
            (*grad)(1) = b * (sumLog1mT - n * (bm::digamma(b) - dab));
        }
        return ll;
    };
    const double m = (st.mean - lo) / w;
    const double v = st.var / (w * w);
    double common = m * (1.0 - m) / v - 1.0;
    if (!(common > 0.0)) common = 2.0;
    const VectorXd lower = VectorXd::Constant(2, std::log(1e-3));
    const VectorXd upper = VectorXd::Constant(2, std::log(1e4));
    optim::Result best;
    best.value = -kInf;
    for (double scale : {1.0, 0.5, 2.0}) {
        VectorXd x0(2);
        x0 << std::log(scale * m * common), std::log(scale * (1.0 - m) * common);
        auto r = optim::boxedQuasiNewtonMaximize(objective, optim::clampToBox(x0, lower, upper), lower, upper,
                                                 {200, 1e-8, 1e-14});
        if (r.value > best.value) best = r;
    }
    return BetaDist{std::exp(best.x(0)), std::exp(best.x(1)), lo, hi};
}

MarginalDistribution fitGamma(std::span<const double> s, const SampleStats& st, const std::optional<Support>& support) {
    const double pad = supportPadding(st);
    const double spread = std::max(st.max - st.min, std::sqrt(st.var));
    const double n = st.n;
    // Parameters: (log shape, log rate, loc) with loc below the sample minimum.
    auto objective = [&](const VectorXd& p, VectorXd* grad) {
        const double k = std::exp(p(0)), lam = std::exp(p(1)), loc = p(2);
        double sumLog = 0.0, sum = 0.0, sumInv = 0.0;
        for (double x : s) {
            const double t = std::max(x - loc, kEdge);
            sumLog += std::log(t);
            sum += t;
            sumInv += 1.0 / t;
        }
        const double ll = (k - 1.0) * sumLog - lam * sum + n * k * std::log(lam) - n * std::lgamma(k);
        if (grad) {
            grad->resize(3);
            (*grad)(0) = k * (sumLog + n * std::log(lam) - n * bm::digamma(k));
            (*grad)(1) = lam * (n * k / lam - sum);
            (*grad)(2) = -(k - 1.0) * sumInv + n * lam;
        }
        return ll;
    };
    VectorXd lower(3), upper(3);
    lower << std::log(1e-2), std::log(1e-8 / spread), st.min - 20.0 * spread;
    if (support) lower(2) = std::min(std::max(lower(2), support->lo), st.min - pad);
    upper << std::log(1e4), std::log(1e8 / spread), st.min - pad;

    std::vector<double> locStarts;
    if (st.skew > 1e-3) {
        const double k = 4.0 / (st.skew * st.skew);
        const double theta = std::sqrt(st.var / k);
        locStarts.push_back(std::min(st.mean - k * theta, st.min - pad));
    }
    locStarts.push_back(st.min - pad);
    locStarts.push_back(st.min - spread);

    optim::Result best;
    best.value = -kInf;
    for (double loc : locStarts) {
        loc = std::max(loc, lower(2));
        const double mu = st.mean - loc;
        const double k = std::max(mu * mu / st.var, 1e-2);
        VectorXd x0(3);
        x0 << std::log(k), std::log(k / mu), loc;
        auto r = optim::boxedQuasiNewtonMaximize(objective, optim::clampToBox(x0, lower, upper), lower, upper,
                                                 {300, 1e-8, 1e-14});
        if (r.value > best.value) best = r;
    }
    return GammaDist{std::exp(best.x(0)), std::exp(best.x(1)), best.x(2)};
}

}  // namespace

MarginalDistribution fitFamily(std::span<const double> samples, Family fam, const std::optional<Support>& support) {
    if (samples.size() < 2) fail(ErrorKind::Data, "at least two samples are required to fit a distribution");
    for (double x : samples)
        if (!std::isfinite(x)) fail(ErrorKind::Data, "samples must be finite");
    const SampleStats st = stats(samples);
    if (!(st.var > 0.0) || st.max == st.min) fail(ErrorKind::Data, "degenerate samples: zero variance");
    if (support && !(support->lo < st.min && st.max < support->hi))
        fail(ErrorKind::Data, "samples fall outside the given support");
    switch (fam) {
    case Family::Uniform: {
        if (support) return UniformDist{support->lo, support->hi};
        const double pad = supportPadding(st);
        return UniformDist{st.min - pad, st.max + pad};
    }
    case Family::Normal:
        return NormalDist{st.mean, std::sqrt(st.var)};
    case Family::Beta:
        return fitBeta(samples, st, support);
    case Family::Gamma:
        return fitGamma(samples, st, support);
    case Family::DiscreteUniform:
        return DiscreteUniformDist{int(std::floor(st.min)), int(std::ceil(st.max))};
    }
    fail(ErrorKind::Domain, "unsupported family");
}

BicFit fitDistributionBic(std::span<const double> samples, const std::set<Family>& candidates,
                          const std::optional<Support>& support) {
    if (samples.size() < 10) fail(ErrorKind::Data, "at least 10 samples are required for BIC fitting");
    if (candidates.empty()) fail(ErrorKind::Config, "no candidate families given");
    BicFit out;
    const double logN = std::log(double(samples.size()));
    double bestBic = kInf;
    for (Family f : candidates) {
        MarginalDistribution d = fitFamily(samples, f, support);
        const double ll = logLikelihood(d, samples);
        const bool bounded = f == Family::Uniform || f == Family::Beta;
        const double bic = (parameterCount(d) - (support && bounded ? 2 : 0)) * logN - 2.0 * ll;
        out.fitted[f] = d;
        out.logLikelihood[f] = ll;
        out.bic[f] = bic;
        if (bic < bestBic) {
            bestBic = bic;
            out.best = d;
        }
    }
    return out;
}

}  // namespace dsopt
