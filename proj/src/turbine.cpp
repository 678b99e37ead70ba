#include "dsopt/turbine.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <unistd.h>

namespace dsopt {

void validate(const OperatingPoint& op) {
    if (!(op.pressureRatio > 0.0 && op.inletTotalPressure > 0.0 && op.inletTotalTemperature > 0.0 &&
          op.massFlow > 0.0))
        fail(ErrorKind::Domain, "operating point values must be positive");
    if (!(op.inletRelativeHumidity >= 0.0 && op.inletRelativeHumidity <= 1.0))
        fail(ErrorKind::Domain, "relative humidity must lie in [0, 1]");
}

namespace {

void requirePositive(std::initializer_list<double> values, const char* what) {
    for (double v : values)
        if (!(v > 0.0)) fail(ErrorKind::Domain, std::string(what) + ": inputs must be positive");
}

}  // namespace

double rotorRadius(double ivr, double ss, double massFlow, double rho5, double dhIs) {
    requirePositive({ivr, ss, massFlow, rho5, dhIs}, "rotor radius");
    return std::pow(4.0 * massFlow * massFlow / (rho5 * rho5 * dhIs), 0.25) / (ivr * ss);
}

double outflowVelocity(double ivr, double fc, double dhIs) {
    requirePositive({ivr, fc, dhIs}, "outflow velocity");
    return std::sqrt(2.0 * dhIs) / (ivr * fc);
}

DerivedGeometry derivedGeometry(const VectorXd& x, double massFlow, double rho5, double dhIs) {
    if (x.size() < 5) fail(ErrorKind::Size, "design vector needs at least IVR, SS, FC, SRR, ALR");
    requirePositive({x(3), x(4)}, "geometry");
    DerivedGeometry g;
    g.r4 = rotorRadius(x(0), x(1), massFlow, rho5, dhIs);
    g.c5 = outflowVelocity(x(0), x(2), dhIs);
    g.rs5 = g.r4 * x(3);
    g.lax = 2.0 * g.r4 * x(4);
    return g;
}

double efficiency(double power, double massFlow, double dhIs) {
    requirePositive({massFlow, dhIs}, "efficiency");
    return power / (massFlow * dhIs);
}

const std::vector<std::string>& turbineParameterNames() {
    static const std::vector<std::string> names{"IVR", "SS", "FC", "SRR", "ALR", "BN", "CAD", "MT", "HCS", "SCS"};
    return names;
}

namespace {

constexpr double kLower[] = {0.55, 0.35, 0.15, 0.6, 0.3, 12.0, -120.0, 3.0, 0.6, 0.1};
constexpr double kUpper[] = {0.85, 0.75, 0.35, 0.85, 0.5, 16.0, 120.0, 5.0, 1.0, 0.3};

}  // namespace

InputModel turbineInputModel() {
    InputModel m;
    m.names = turbineParameterNames();
    for (int n = 0; n < 10; ++n) {
        if (n == 5)
            m.marginals.push_back(DiscreteUniformDist{12, 16});
        else
            m.marginals.push_back(UniformDist{kLower[n], kUpper[n]});
    }
    return m;
}

std::vector<Index> turbineInfluentialDims() { return {0, 1, 2, 5, 8}; }

double turbineEfficiencyProxy(const VectorXd& x) {
    if (x.size() != 10) fail(ErrorKind::Size, "turbine proxy takes 10 inputs");
    double v[10];
    for (int n = 0; n < 10; ++n) v[n] = (x(n) - kLower[n]) / (kUpper[n] - kLower[n]);
    double g = 1.6;
    g -= 5.0 * (1.3 * std::pow(v[0] - 0.62, 2) + 1.2 * std::pow(v[1] - 0.55, 2) + 1.1 * std::pow(v[2] - 0.42, 2));
    g += 5.0 * 0.35 * (v[0] - 0.5) * (v[1] - 0.5);
    g += 5.0 * 2.2 * (v[0] - 0.62) * (v[1] - 0.55);
    g += 1.35 * std::cos(M_PI * (v[5] - 0.5));
    g += 1.8 * std::sin(0.9 * M_PI * v[8]);
    g += 0.01 * (v[3] - std::pow(v[4] - 0.5, 2) + 0.75 * std::cos(M_PI * v[6]) - v[7] + 0.75 * v[9]);
    return 1.0 / (1.0 + std::exp(-g));
}

double Benchmark::operator()(const VectorXd& physical) const {
    if (physical.size() != dims())
        fail(ErrorKind::Size, name + " takes " + std::to_string(dims()) + " inputs, got " +
                                  std::to_string(physical.size()));
    return f(physical);
}

double Benchmark::evaluateUnit(const VectorXd& u) const { return (*this)(inputs.toPhysical(u)); }

namespace {

InputModel uniformModel(const std::vector<double>& lo, const std::vector<double>& hi,
                        const std::vector<std::string>& names = {}) {
    InputModel m;
    for (std::size_t n = 0; n < lo.size(); ++n) {
        m.marginals.push_back(UniformDist{lo[n], hi[n]});
        m.names.push_back(n < names.size() ? names[n] : "x" + std::to_string(n + 1));
    }
    return m;
}

Benchmark ishigami() {
    Benchmark b;
    b.name = "Ishigami";
    b.inputs = uniformModel({-M_PI, -M_PI, -M_PI}, {M_PI, M_PI, M_PI});
    b.f = [](const VectorXd& x) {
        return std::sin(x(0)) + 7.0 * std::pow(std::sin(x(1)), 2) + 0.1 * std::pow(x(2), 4) * std::sin(x(0));
    };
    const double a = 7.0, c = 0.1, pi4 = std::pow(M_PI, 4), pi8 = std::pow(M_PI, 8);
    const double V = a * a / 8.0 + c * pi4 / 5.0 + c * c * pi8 / 18.0 + 0.5;
    const double V1 = 0.5 * std::pow(1.0 + c * pi4 / 5.0, 2), V2 = a * a / 8.0;
    const double V13 = c * c * pi8 * (1.0 / 18.0 - 1.0 / 50.0);
    b.analyticFirstOrder = Eigen::Vector3d(V1 / V, V2 / V, 0.0);
    b.analyticTotalOrder = Eigen::Vector3d((V1 + V13) / V, V2 / V, V13 / V);
    return b;
}

Benchmark sobolG(Index dims) {
    if (dims < 1) fail(ErrorKind::Config, "SobolG needs at least one dimension");
    Benchmark b;
    b.name = "SobolG";
    b.inputs = uniformModel(std::vector<double>(std::size_t(dims), 0.0), std::vector<double>(std::size_t(dims), 1.0));
    VectorXd a(dims);
    const double head[] = {0.0, 1.0, 4.5, 9.0};
    for (Index n = 0; n < dims; ++n) a(n) = n < 4 ? head[n] : 99.0;
    b.f = [a](const VectorXd& x) {
        double p = 1.0;
        for (Index n = 0; n < x.size(); ++n) p *= (std::abs(4.0 * x(n) - 2.0) + a(n)) / (1.0 + a(n));
        return p;
    };
    const VectorXd Vn = (1.0 / (3.0 * (1.0 + a.array()).square())).matrix();
    const double V = (1.0 + Vn.array()).prod() - 1.0;
    VectorXd total(dims);
    for (Index n = 0; n < dims; ++n) total(n) = Vn(n) * (1.0 + Vn.array()).prod() / (1.0 + Vn(n)) / V;
    b.analyticFirstOrder = Vn / V;
    b.analyticTotalOrder = total;
    return b;
}

Benchmark borehole() {
    Benchmark b;
    b.name = "Borehole";
    b.inputs = uniformModel({0.05, 100.0, 63070.0, 990.0, 63.1, 700.0, 1120.0, 9855.0},
                            {0.15, 50000.0, 115600.0, 1110.0, 116.0, 820.0, 1680.0, 12045.0},
                            {"rw", "r", "Tu", "Hu", "Tl", "Hl", "L", "Kw"});
    b.f = [](const VectorXd& x) {
        const double rw = x(0), r = x(1), Tu = x(2), Hu = x(3), Tl = x(4), Hl = x(5), L = x(6), Kw = x(7);
        const double lr = std::log(r / rw);
        return 2.0 * M_PI * Tu * (Hu - Hl) / (lr * (1.0 + 2.0 * L * Tu / (lr * rw * rw * Kw) + Tu / Tl));
    };
    return b;
}

Benchmark turbine() {
    Benchmark b;
    b.name = "TurbineEfficiencyProxy";
    b.inputs = turbineInputModel();
    b.f = turbineEfficiencyProxy;
    return b;
}

Benchmark sphere(Index dims) {
    if (dims < 1) fail(ErrorKind::Config, "Sphere needs at least one dimension");
    Benchmark b;
    b.name = "Sphere";
    b.inputs = uniformModel(std::vector<double>(std::size_t(dims), 0.0), std::vector<double>(std::size_t(dims), 1.0));
    b.f = [](const VectorXd& x) { return -(x.array() - 0.6).square().sum(); };
    b.optimumPoint = VectorXd::Constant(dims, 0.6);
    b.optimumValue = 0.0;
    return b;
}

Benchmark branin() {
    Benchmark b;
    b.name = "Branin";
    b.inputs = uniformModel({-5.0, 0.0}, {10.0, 15.0});
    b.f = [](const VectorXd& x) {
        const double a = 1.0, bb = 5.1 / (4.0 * M_PI * M_PI), c = 5.0 / M_PI, r = 6.0, s = 10.0, t = 1.0 / (8.0 * M_PI);
        return -(a * std::pow(x(1) - bb * x(0) * x(0) + c * x(0) - r, 2) + s * (1.0 - t) * std::cos(x(0)) + s);
    };
    b.optimumPoint = Eigen::Vector2d(M_PI, 2.275);
    b.optimumValue = -0.39788735772973816;
    return b;
}

}  // namespace

Benchmark makeBenchmark(const std::string& name, Index dims) {
    if (name == "Ishigami") return ishigami();
    if (name == "SobolG") return sobolG(dims > 0 ? dims : 8);
    if (name == "Borehole") return borehole();
    if (name == "TurbineEfficiencyProxy") return turbine();
    if (name == "Sphere") return sphere(dims > 0 ? dims : 2);
    if (name == "Branin") return branin();
    fail(ErrorKind::Config, "unknown objective '" + name + "'");
}

std::vector<std::string> benchmarkNames() {
    return {"Ishigami", "SobolG", "Borehole", "TurbineEfficiencyProxy", "Sphere", "Branin"};
}

VectorXd ExternalProcessObjective::evaluate(const MatrixXd& unit, const std::vector<std::string>& names,
                                            MatrixXd* realized) const {
    static std::atomic<unsigned> counter{0};
    const auto path = std::filesystem::temp_directory_path() /
                      ("dsopt_points_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".csv");
    {
        std::ofstream out(path);
        if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
        for (Index n = 0; n < unit.cols(); ++n)
            out << (n ? "," : "") << (std::size_t(n) < names.size() ? names[std::size_t(n)] : "x" + std::to_string(n + 1));
        out << '\n';
        out.precision(17);
        for (Index i = 0; i < unit.rows(); ++i) {
            for (Index n = 0; n < unit.cols(); ++n) out << (n ? "," : "") << unit(i, n);
            out << '\n';
        }
    }
    const std::string cmd = command_ + " < '" + path.string() + "'";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
        std::filesystem::remove(path);
        fail(ErrorKind::Io, "cannot start objective process: " + command_);
    }
    std::string output;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, got);
    const int status = ::pclose(pipe);
    std::filesystem::remove(path);
    if (status != 0) fail(ErrorKind::Io, "objective process failed (status " + std::to_string(status) + "): " + command_);

    VectorXd y(unit.rows());
    if (realized) realized->setConstant(unit.rows(), unit.cols(), std::numeric_limits<double>::quiet_NaN());
    std::istringstream lines(output);
    std::string line;
    Index row = 0;
    while (std::getline(lines, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (row >= unit.rows()) fail(ErrorKind::Io, "objective process returned more lines than points");
        std::vector<double> values;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                fail(ErrorKind::Io, "objective process returned a non-numeric value: " + line);
            }
        }
        y(row) = values.at(0);
        if (values.size() > 1) {
            if (Index(values.size()) != unit.cols() + 1)
                fail(ErrorKind::Io, "realized inputs must list every dimension: " + line);
            if (realized)
                for (Index n = 0; n < unit.cols(); ++n) (*realized)(row, n) = values[std::size_t(n + 1)];
        }
        ++row;
    }
    if (row != unit.rows())
        fail(ErrorKind::Io, "objective process returned " + std::to_string(row) + " responses for " +
                                std::to_string(unit.rows()) + " points");
    return y;
}

}  // namespace dsopt
