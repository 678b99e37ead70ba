#include "dsopt/bayes_opt.hpp"
#include "dsopt/design.hpp"
#include "dsopt/turbine.hpp"

#include <doctest.h>

#include <cmath>

using namespace dsopt;

namespace {

GpModel peakModel() {
    // Single peak at 0.7 on a 1D grid.
    MatrixXd X(7, 1);
    X << 0.0, 0.2, 0.4, 0.6, 0.7, 0.8, 1.0;
    VectorXd y(7);
    for (Index i = 0; i < 7; ++i) y(i) = std::exp(-20.0 * std::pow(X(i, 0) - 0.7, 2));
    return GpModel(KernelSpec{KernelFamily::RBF, VectorXd::Constant(1, 0.15), 1.0}, X, y);
}

BoContext unitContext(Index N) {
    BoContext ctx;
    for (Index n = 0; n < N; ++n) ctx.inputs.marginals.push_back(UniformDist{0.0, 1.0});
    ctx.gp.starts = 4;
    ctx.acquisition.poolSize = 1024;
    return ctx;
}

}  // namespace

TEST_CASE("ucb") {
    CHECK(ucb(0.5, 0.2, 2.0) == 0.9);
    CHECK(ucb(0.3, 0.0, 7.0) == 0.3);
    CHECK(ucb(0.0, 1.0, 0.5) == 0.5);
    CHECK(ucb(0.1, 0.3, 2.0) > ucb(0.1, 0.3, 1.0));
    CHECK(ucb(0.1, 0.4, 1.0) > ucb(0.1, 0.3, 1.0));
    CHECK_THROWS_AS(ucb(0.0, -1e-3, 1.0), Error);
    CHECK(AcquisitionSpec::forPhase(Phase::Balanced).beta == 1.0);
    CHECK(AcquisitionSpec::forPhase(Phase::Exploitation).beta == 0.5);
    CHECK(phaseFromName("Exploration") == Phase::Exploration);
    CHECK_THROWS_AS(phaseFromName("greedy"), Error);
}

TEST_CASE("pure exploitation dominates the candidate pool") {
    const GpModel gp = peakModel();
    const auto mask = SubspaceMask::full(1);
    AcquisitionOptions opts;
    opts.poolSize = 256;
    const auto p = maximizeAcquisition(gp, {0.0, Phase::Exploitation}, mask, 3, opts);
    const MatrixXd pool = haltonPoints(256, 1, 3);
    VectorXd mean, var;
    gp.predict(pool, mean, var);
    CHECK(gp.predict(p.point).mean >= mean.maxCoeff());
    CHECK(std::abs(p.point(0) - 0.7) < 0.02);
    const auto again = maximizeAcquisition(gp, {0.0, Phase::Exploitation}, mask, 3, opts);
    CHECK(again.point == p.point);
}

TEST_CASE("large beta moves away from the data") {
    MatrixXd X(3, 1);
    X << 0.1, 0.15, 0.2;
    const GpModel gp(KernelSpec{KernelFamily::Matern52, VectorXd::Constant(1, 0.1), 1.0}, X, Eigen::Vector3d(0.2, 0.3, 0.1));
    const auto p = maximizeAcquisition(gp, {1e3, Phase::Exploration}, SubspaceMask::full(1), 0);
    for (Index i = 0; i < 3; ++i) CHECK(std::abs(p.point(0) - X(i, 0)) >= 0.1);
}

TEST_CASE("masked proposals vary only the active coordinate") {
    const MatrixXd X = lhsDesign(12, 3, 1).points;
    VectorXd y(12);
    for (Index i = 0; i < 12; ++i) y(i) = std::sin(4.0 * X(i, 0)) + X(i, 1) * X(i, 2);
    const GpModel gp(KernelSpec{KernelFamily::Matern52, VectorXd::Constant(3, 0.3), 1.0}, X, y);
    auto mask = SubspaceMask::full(3);
    mask.active[0] = mask.active[2] = false;
    mask.fixedValues << 0.123456789, 0.5, 0.987654321;
    const auto p = maximizeAcquisition(gp, {1.0, Phase::Balanced}, mask, 9);
    CHECK(p.point(0) == 0.123456789);
    CHECK(p.point(2) == 0.987654321);
    const auto batch = proposeBatch(gp, {1.0, Phase::Balanced}, mask, 2, 9);
    REQUIRE(batch.size() == 2);
    for (const auto& b : batch) {
        CHECK(b.point(0) == 0.123456789);
        CHECK(b.point(2) == 0.987654321);
    }
    CHECK(batch[0].point(1) != batch[1].point(1));
}

TEST_CASE("constant liar batches") {
    // Symmetric bimodal posterior on [0,1].
    MatrixXd X(5, 1);
    X << 0.0, 0.25, 0.5, 0.75, 1.0;
    const GpModel gp(KernelSpec{KernelFamily::RBF, VectorXd::Constant(1, 0.1), 1.0}, X,
                     (VectorXd(5) << 0.0, 1.0, 0.0, 1.0, 0.0).finished());
    const auto mask = SubspaceMask::full(1);
    const auto single = proposeBatch(gp, {1.0, Phase::Balanced}, mask, 1, 5);
    CHECK(single[0].point == maximizeAcquisition(gp, {1.0, Phase::Balanced}, mask, 5).point);
    for (double beta : {0.0, 0.5, 2.0}) {
        const auto batch = proposeBatch(gp, {beta, Phase::Exploration}, mask, 3, 5);
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = a + 1; b < 3; ++b) CHECK(std::abs(batch[a].point(0) - batch[b].point(0)) >= 1e-3);
    }
    CHECK_THROWS_AS(proposeBatch(gp, {1.0, Phase::Balanced}, mask, 0, 5), Error);
}

TEST_CASE("fixing non-influential coordinates") {
    std::vector<Sample> s;
    for (int i = 0; i < 12; ++i) {
        Sample x;
        x.unit = Eigen::Vector3d(0.05 * i, 0.3, 1.0 - 0.05 * i);
        x.physical = x.unit;
        x.response = double(i);
        s.push_back(x);
    }
    const Dataset data(s);
    auto mask = SubspaceMask::full(3);
    mask.active[1] = mask.active[2] = false;

    auto top1 = fixNonInfluential(data, mask, 1);
    CHECK(top1.fixedValues(2) == doctest::Approx(1.0 - 0.55));
    CHECK(top1.fixedValues(1) == doctest::Approx(0.3));
    CHECK(top1.fixedValues(0) == 0.5);

    // Top ten responses are i = 2..11: third coordinate mean 1 - 0.05 * 6.5.
    auto top10 = fixNonInfluential(data, mask, 10);
    CHECK(top10.fixedValues(2) == doctest::Approx(0.675));
    CHECK(top10.fixedValues(1) == doctest::Approx(0.3));
    CHECK(top10.active == mask.active);

    CHECK_THROWS_AS(fixNonInfluential(data, mask, 13), Error);
    CHECK(fixNonInfluential(data, SubspaceMask::full(3), 5).fixedValues == SubspaceMask::full(3).fixedValues);
}

TEST_CASE("BO on the negated sphere") {
    const auto sphere = makeBenchmark("Sphere", 2);
    auto ctx = unitContext(2);
    BoState state;
    state.budget = 20;
    evaluateAndAppend(state, ctx, pointwise(sphere.f), lhsDesign(10, 2, 4).points, Partition::Training, 1);
    const double initial = state.bestSoFar;
    double prev = initial;
    for (int k = 0; k < 10; ++k) {
        const auto r = boStep(state, ctx, pointwise(sphere.f), AcquisitionSpec::forPhase(Phase::Balanced), 1,
                              SubspaceMask::full(2), 1, 100 + k);
        CHECK(r.bestSoFar >= prev);
        prev = r.bestSoFar;
    }
    CHECK(state.bestSoFar > initial);
    CHECK(state.budgetUsed == 20);
    const VectorXd best = state.data[state.bestIndex].physical;
    CHECK(std::abs(best(0) - 0.6) < 0.05);
    CHECK(std::abs(best(1) - 0.6) < 0.05);
    CHECK(state.log.size() == 10);

    try {
        boStep(state, ctx, pointwise(sphere.f), AcquisitionSpec::forPhase(Phase::Balanced), 1, SubspaceMask::full(2),
               1, 0);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Budget);
    }

    const auto j = toJson(state.log.back());
    const auto back = boRecordFromJson(j);
    CHECK(back.unit == state.log.back().unit);
    CHECK(back.bestSoFar == state.log.back().bestSoFar);
    CHECK(j["phase"] == "Balanced");
}

TEST_CASE("constant objective") {
    auto ctx = unitContext(2);
    BoState state;
    state.budget = 14;
    auto flat = pointwise([](const VectorXd&) { return 0.8; });
    evaluateAndAppend(state, ctx, flat, lhsDesign(10, 2, 1).points, Partition::Training, 1);
    for (int k = 0; k < 2; ++k) {
        const auto r = boStep(state, ctx, flat, AcquisitionSpec::forPhase(Phase::Exploration), 2,
                              SubspaceMask::full(2), 1, k);
        CHECK(r.bestSoFar == 0.8);
    }
}

TEST_CASE("realized inputs replace targets") {
    auto ctx = unitContext(2);
    BoState state;
    state.budget = 2;
    BatchObjective obj = [](const MatrixXd& u, const MatrixXd& x, MatrixXd* realized) {
        realized->row(0) = Eigen::RowVector2d(0.25, 0.75);
        return VectorXd(x.col(0) + u.col(1));
    };
    MatrixXd U(2, 2);
    U << 0.1, 0.2, 0.3, 0.4;
    evaluateAndAppend(state, ctx, obj, U, Partition::Training, 1);
    CHECK(state.data[0].unit == Eigen::Vector2d(0.25, 0.75));
    CHECK(state.data[1].unit == Eigen::Vector2d(0.3, 0.4));
    CHECK(state.data[0].response == doctest::Approx(0.3));
}

TEST_CASE("staged BO on the negated Branin function") {
    const auto branin = makeBenchmark("Branin");
    BoContext ctx;
    ctx.inputs = branin.inputs;
    BoState state;
    state.budget = 50;
    const auto design = maxProDesign(20, 2, 2024);
    evaluateAndAppend(state, ctx, pointwise(branin.f), design.points, Partition::Training, 1);
    const double initial = state.bestSoFar;
    int seed = 0;
    for (Phase phase : {Phase::Exploration, Phase::Balanced, Phase::Exploitation})
        for (int k = 0; k < 10; ++k)
            boStep(state, ctx, pointwise(branin.f), AcquisitionSpec::forPhase(phase), 1, SubspaceMask::full(2), 1,
                   std::uint64_t(seed++));
    MESSAGE("Branin initial best " << initial << ", final best " << state.bestSoFar);
    CHECK(state.bestSoFar >= initial);
    CHECK(std::abs(state.bestSoFar - *branin.optimumValue) < 0.05);
    // Frozen on the first green run.
    CHECK(std::abs(state.bestSoFar - -0.397910) < 1e-5);
}
