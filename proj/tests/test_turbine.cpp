#include "dsopt/pce.hpp"
#include "dsopt/sensitivity.hpp"
#include "dsopt/turbine.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dsopt;

TEST_CASE("rotor radius scaling") {
    CHECK(rotorRadius(1.0, 1.0, 1.0, 1.0, 1.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    const double r = rotorRadius(0.7, 0.55, 0.411, 1.3, 2.1e5);
    CHECK(std::abs(rotorRadius(1.4, 0.55, 0.411, 1.3, 2.1e5) - r / 2.0) < 1e-12 * r);
    // r4 grows with the square root of the mass flow.
    CHECK(std::abs(rotorRadius(0.7, 0.55, 2.0 * 0.411, 1.3, 2.1e5) - std::sqrt(2.0) * r) < 1e-12 * r);
    CHECK(std::abs(rotorRadius(0.7, 0.55, 4.0 * 0.411, 1.3, 2.1e5) - 2.0 * r) < 1e-12 * r);
    CHECK_THROWS_AS(rotorRadius(0.0, 1.0, 1.0, 1.0, 1.0), Error);
    CHECK_THROWS_AS(rotorRadius(1.0, 1.0, 1.0, -1.0, 1.0), Error);
}

TEST_CASE("outflow velocity") {
    CHECK(outflowVelocity(1.0, 1.0, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(outflowVelocity(1.0, 1.0, 1.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(outflowVelocity(1.0, 2.0, 1.0) == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-15));
    CHECK_THROWS_AS(outflowVelocity(1.0, 0.0, 1.0), Error);
}

TEST_CASE("derived geometry and efficiency") {
    VectorXd x(5);
    x << 1.0, 1.0, 1.0, 0.7, 0.4;
    const auto g = derivedGeometry(x, 1.0, 1.0, 1.0);
    CHECK(g.rs5 == doctest::Approx(0.98994949).epsilon(1e-8));
    CHECK(g.lax == doctest::Approx(1.13137085).epsilon(1e-8));
    x(3) = 1.0;
    CHECK(derivedGeometry(x, 1.0, 1.0, 1.0).rs5 == derivedGeometry(x, 1.0, 1.0, 1.0).r4);
    CHECK_THROWS_AS(derivedGeometry(VectorXd::Ones(3), 1.0, 1.0, 1.0), Error);

    CHECK(efficiency(0.4, 1.0, 0.5) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(efficiency(0.0, 1.0, 0.5) == 0.0);
    CHECK(efficiency(0.5, 1.0, 0.5) == 1.0);
    CHECK_THROWS_AS(efficiency(1.0, 0.0, 1.0), Error);
}

TEST_CASE("operating point") {
    OperatingPoint op;
    CHECK(op.pressureRatio == 4.42);
    CHECK(op.massFlow == 0.411);
    CHECK_NOTHROW(validate(op));
    op.inletRelativeHumidity = 1.2;
    CHECK_THROWS_AS(validate(op), Error);
}

TEST_CASE("benchmark values") {
    const auto ish = makeBenchmark("Ishigami");
    CHECK(std::abs(ish.evaluateUnit(VectorXd::Constant(3, 0.5))) < 1e-15);

    const auto g = makeBenchmark("SobolG", 6);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double a[] = {0.0, 1.0, 4.5, 9.0, 99.0, 99.0};
    for (int t = 0; t < 20; ++t) {
        VectorXd u(6);
        for (Index n = 0; n < 6; ++n) u(n) = U(rng);
        double p = 1.0;
        for (int n = 0; n < 6; ++n) p *= (std::fabs(4.0 * u(n) - 2.0) + a[n]) / (1.0 + a[n]);
        CHECK(g.evaluateUnit(u) == doctest::Approx(p).epsilon(1e-14));
    }

    // Borehole nominal point from the literature: about 72.9 m^3/yr at the range centres.
    const auto bh = makeBenchmark("Borehole");
    const double f = bh.evaluateUnit(VectorXd::Constant(8, 0.5));
    CHECK(f > 60.0);
    CHECK(f < 90.0);

    const auto br = makeBenchmark("Branin");
    CHECK(br(*br.optimumPoint) == doctest::Approx(*br.optimumValue).epsilon(1e-6));
    CHECK(br(Eigen::Vector2d(-M_PI, 12.275)) == doctest::Approx(*br.optimumValue).epsilon(1e-6));

    const auto sp = makeBenchmark("Sphere", 3);
    CHECK(sp(*sp.optimumPoint) == 0.0);
    CHECK(sp(VectorXd::Zero(3)) == doctest::Approx(-1.08));

    CHECK_THROWS_AS(ish(VectorXd::Zero(2)), Error);
    CHECK_THROWS_AS(makeBenchmark("Rosenbrock"), Error);
    for (const auto& name : benchmarkNames()) CHECK(makeBenchmark(name).name == name);
}

TEST_CASE("turbine proxy is bounded and rounds blade number") {
    const auto b = makeBenchmark("TurbineEfficiencyProxy");
    CHECK(b.dims() == 10);
    CHECK(b.inputs.names[5] == "BN");
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double lo = 1.0, hi = 0.0;
    for (int t = 0; t < 100000; ++t) {
        VectorXd u(10);
        for (Index n = 0; n < 10; ++n) u(n) = U(rng);
        const double eta = b.evaluateUnit(u);
        lo = std::min(lo, eta);
        hi = std::max(hi, eta);
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
    VectorXd u = VectorXd::Constant(10, 0.5);
    const double mid = b.evaluateUnit(u);
    u(5) = 0.52;
    CHECK(b.evaluateUnit(u) == mid);
}

TEST_CASE("turbine proxy anisotropy") {
    const auto b = makeBenchmark("TurbineEfficiencyProxy");
    const auto r = sobolMonteCarlo(b.f, b.inputs, 1 << 14, 17);
    const auto influential = turbineInfluentialDims();
    double rest = 0.0;
    for (Index n = 0; n < 10; ++n) {
        if (std::find(influential.begin(), influential.end(), n) != influential.end()) {
            CHECK(r.totalOrder(n) > 0.07);
        } else {
            CHECK(r.totalOrder(n) < 0.05);
            rest += r.totalOrder(n);
        }
    }
    CHECK(rest < 1e-3);
    // IVR and SS form a tilted valley: most of their variance is joint.
    CHECK(r.totalOrder(0) - r.firstOrder(0) > 0.3);
    CHECK(r.totalOrder(1) - r.firstOrder(1) > 0.3);
}

TEST_CASE("analytic Sobol recovery on SobolG") {
    const auto g = makeBenchmark("SobolG", 4);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    MatrixXd u(2000, 4);
    VectorXd z(2000);
    for (Index i = 0; i < 2000; ++i) {
        for (Index n = 0; n < 4; ++n) u(i, n) = U(rng);
        z(i) = g.evaluateUnit(u.row(i).transpose());
    }
    const auto r = sobolFromPce(fitPceLeastSquares(u, z, buildTotalDegreeBasis(4, 8)));
    for (Index n = 0; n < 4; ++n) {
        CHECK(std::abs(r.firstOrder(n) - (*g.analyticFirstOrder)(n)) < 0.02);
        CHECK(std::abs(r.totalOrder(n) - (*g.analyticTotalOrder)(n)) < 0.02);
    }
}

TEST_CASE("external process objective") {
    const ExternalProcessObjective sum("awk -F, 'NR > 1 { print $1 + $2 }'");
    MatrixXd u(3, 2);
    u << 0.1, 0.2, 0.3, 0.4, 0.5, 0.25;
    MatrixXd realized;
    const VectorXd y = sum.evaluate(u, {"a", "b"}, &realized);
    CHECK(y(0) == doctest::Approx(0.3));
    CHECK(y(2) == doctest::Approx(0.75));
    CHECK(std::isnan(realized(1, 0)));

    const ExternalProcessObjective withInputs("awk -F, 'NR > 1 { print $1 * $2 \",\" $1 + 1 \",\" $2 + 1 }'");
    withInputs.evaluate(u, {"a", "b"}, &realized);
    CHECK(realized(2, 1) == doctest::Approx(1.25));

    CHECK_THROWS_AS(ExternalProcessObjective("false").evaluate(u, {}), Error);
    CHECK_THROWS_AS(ExternalProcessObjective("echo 1").evaluate(u, {}), Error);
}
