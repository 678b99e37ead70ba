#pragma once

#include "dsopt/core.hpp"
#include "dsopt/probability.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dsopt {

/// Turbine operating point; defaults are the PEMFC air-supply design point.
struct OperatingPoint {
    double pressureRatio = 4.42;
    double inletTotalPressure = 2.08;      ///< bar
    double inletTotalTemperature = 358.15; ///< K
    double massFlow = 0.411;               ///< kg/s
    double inletRelativeHumidity = 0.6;
};

void validate(const OperatingPoint& op);

/// r4 = (4 mdot^2 / (rho5^2 dh))^(1/4) / (IVR * SS).
double rotorRadius(double ivr, double ss, double massFlow, double rho5, double dhIs);
/// c5 = sqrt(2 dh) / (IVR * FC).
double outflowVelocity(double ivr, double fc, double dhIs);

struct DerivedGeometry {
    double r4 = 0.0;
    double c5 = 0.0;
    double rs5 = 0.0;  ///< r4 * SRR
    double lax = 0.0;  ///< 2 r4 * ALR
};

/// Geometry from a 10-dimensional design vector (IVR, SS, FC, SRR, ALR, ...).
DerivedGeometry derivedGeometry(const VectorXd& x, double massFlow, double rho5, double dhIs);

/// eta = P / (mdot dh).
double efficiency(double power, double massFlow, double dhIs);

/// Names of the ten turbine design parameters.
const std::vector<std::string>& turbineParameterNames();

/// IVR, SS and FC uniform over [0.55, 0.85], [0.35, 0.75], [0.15, 0.35]; the rest as prescribed
/// (BN discrete uniform on 12..16).
InputModel turbineInputModel();

/// Dimensions the proxy is built to depend on: IVR, SS, FC, BN, HCS.
std::vector<Index> turbineInfluentialDims();

/// Smooth analytic stand-in for the CFD efficiency, in (0,1). Takes physical inputs.
///
///   g = 1.6 - 5 [1.3 (v1 - 0.62)^2 + 1.2 (v2 - 0.55)^2 + 1.1 (v3 - 0.42)^2]
///       + 1.75 (v1 - 0.5)(v2 - 0.5) + 11 (v1 - 0.62)(v2 - 0.55)
///       + 1.35 cos(pi (v6 - 0.5)) + 1.8 sin(0.9 pi v9)
///       + 0.01 [v4 - (v5 - 0.5)^2 + 0.75 cos(pi v7) - v8 + 0.75 v10]
///   eta = 1 / (1 + exp(-g))
///
/// with v_n the input scaled to [0,1] over its range.
double turbineEfficiencyProxy(const VectorXd& x);

/// Objective on physical inputs with its native input model.
struct Benchmark {
    std::string name;
    InputModel inputs;
    std::function<double(const VectorXd&)> f;
    std::optional<VectorXd> optimumPoint;   ///< physical coordinates
    std::optional<double> optimumValue;
    std::optional<VectorXd> analyticFirstOrder;
    std::optional<VectorXd> analyticTotalOrder;

    Index dims() const { return inputs.dims(); }
    double operator()(const VectorXd& physical) const;
    /// Maps u through the inverse CDFs (discrete dims rounded) first.
    double evaluateUnit(const VectorXd& u) const;
};

/// Ishigami, SobolG, Borehole, TurbineEfficiencyProxy, Sphere, Branin. `dims` applies to
/// SobolG (default 8) and Sphere (default 2).
Benchmark makeBenchmark(const std::string& name, Index dims = 0);
std::vector<std::string> benchmarkNames();

/// Objective delegated to a child process. The points are written as CSV (header of names,
/// one row of unit-hypercube coordinates per point) to the command's standard input; each output
/// line holds a response, optionally followed by the realized physical input values.
class ExternalProcessObjective {
public:
    explicit ExternalProcessObjective(std::string command) : command_(std::move(command)) {}

    /// Returns one response per row of `unit`. Rows of `realized` are NaN where the
    /// process did not report realized inputs.
    VectorXd evaluate(const MatrixXd& unit, const std::vector<std::string>& names, MatrixXd* realized = nullptr) const;

    const std::string& command() const { return command_; }

private:
    std::string command_;
};

}  // namespace dsopt
