#include "latmech/oracle.hpp"

#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace latmech;

TEST_CASE("single-bond closed form", "[oracle]") {
    BondParams p;
    p.x0 = -0.1;
    p.x1 = 0.1;
    p.x2 = 0.3;
    p.x3 = 0.4;
    p.f0 = -0.1;
    p.f1 = 0.1;
    p.ref_length = std::sqrt(2.0);

    const auto elastic = oracle::single_bond_closed_form(p, 0.05, KtildeMode::Midpoint, 0.0);
    REQUIRE(elastic.force == Catch::Approx(0.05).margin(1e-15));
    REQUIRE(elastic.regime == Regime::TensileElastic);

    const auto plateau = oracle::single_bond_closed_form(p, 0.25, KtildeMode::Midpoint, 0.0);
    REQUIRE(plateau.force == Catch::Approx(0.1).margin(1e-15));
    REQUIRE(plateau.regime == Regime::PlasticPlateau);

    const auto failed = oracle::single_bond_closed_form(p, 0.45, KtildeMode::Midpoint, 0.0);
    REQUIRE(failed.force == 0.0);
    REQUIRE(failed.regime == Regime::Failed);
    REQUIRE(failed.reaction == 0.0);

    const auto compressed = oracle::single_bond_closed_form(p, -0.05, KtildeMode::Midpoint, 0.0);
    REQUIRE(compressed.force == Catch::Approx(-0.05).margin(1e-15));
    REQUIRE(compressed.regime == Regime::CompressiveElastic);
    REQUIRE(compressed.reaction > 0.0);  // negative stiffness times negative elongation
}

TEST_CASE("dense solve reproduces the chain solution", "[oracle]") {
    NodalField pos(3, 3);
    pos << 0, 0, 0, 1, 0, 0, 2, 0, 0;
    const LatticeGraph g(pos, {{1, 0}, {2, 1}});

    DofMask mask(3);
    for (int ax = 0; ax < 3; ++ax) {
        mask.prescribe_displacement(0, ax, 0.0);
        mask.prescribe_displacement(2, ax, ax == 0 ? 0.1 : 0.0);
    }
    const auto snap = oracle::build_dense_snapshot(g.edges(), 3, Eigen::VectorXd::Ones(2));
    const auto res = oracle::dense_solve(snap, mask);
    REQUIRE(res.solution(1, 0) == Catch::Approx(0.05).margin(1e-14));
    REQUIRE(res.nodal_force(0, 0) == Catch::Approx(-0.05).margin(1e-14));
    REQUIRE(res.nodal_force(2, 0) == Catch::Approx(0.05).margin(1e-14));
    REQUIRE(res.residual[0] <= 1e-14);
}

TEST_CASE("dense regularized route", "[oracle]") {
    SECTION("rank-deficient block approaches the pseudoinverse answer") {
        Eigen::MatrixXd a11(2, 2);
        a11 << 1, -1, -1, 1;
        Eigen::VectorXd rhs(2);
        rhs << 1, -1;
        const Eigen::VectorXd x = oracle::dense_regularized(a11, rhs, 1e-4);
        const Eigen::VectorXd min_norm =
            a11.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
        REQUIRE((x - min_norm).norm() <= 1e-7);
    }
    SECTION("zero block gives zero") {
        const Eigen::MatrixXd a11 = Eigen::MatrixXd::Zero(3, 3);
        const Eigen::VectorXd x = oracle::dense_regularized(a11, Eigen::VectorXd::Ones(3), 1e-8);
        REQUIRE(x.isZero(0.0));
    }
    SECTION("full-rank block matches the direct inverse for small theta") {
        Eigen::MatrixXd a11(2, 2);
        a11 << 3, -1, -1, 2;
        Eigen::VectorXd rhs(2);
        rhs << 1, 4;
        const Eigen::VectorXd direct = a11.partialPivLu().solve(rhs);
        const Eigen::VectorXd reg = oracle::dense_regularized(a11, rhs, 1e-8);
        REQUIRE((reg - direct).norm() <= 1e-5 * direct.norm());
    }
}

TEST_CASE("engine and oracle agree on the unit-cell cases", "[oracle]") {
    const LatticeGraph g = testsup::unit_cell_graph();
    const auto params = testsup::unit_cell_params(g);
    for (int c = 0; c < 4; ++c) {
        const auto in = testsup::case_inputs(c);
        const DofMask mask = testsup::case_mask(in);
        for (KtildeMode mode : {KtildeMode::Midpoint, KtildeMode::PaperLiteral}) {
            const Eigen::VectorXd kdiag = testsup::case_ktilde(params, in.regime, mode, 0.0);
            const auto report = oracle::verify_linear_system(g, kdiag, mask);
            INFO("case " << c << " mode " << to_string(mode));
            REQUIRE(report.max_rel_solution <= 1e-8);
            REQUIRE(report.max_rel_reaction <= 1e-8);
            REQUIRE(report.max_residual <= 1e-8);
        }
    }
}

TEST_CASE("engine and oracle agree on random graphs", "[oracle]") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const LatticeGraph g = oracle::random_graph(rng, 30, 20);
        std::uniform_real_distribution<double> stiff(0.1, 10.0);
        Eigen::VectorXd kdiag(g.edge_count());
        for (int i = 0; i < g.edge_count(); ++i) kdiag[i] = stiff(rng);
        const DofMask mask = oracle::random_mask(rng, g.node_count());

        const auto report = oracle::verify_linear_system(g, kdiag, mask);
        REQUIRE(report.pass(1e-8));
    }
}

TEST_CASE("the checker notices a corrupted operator", "[oracle]") {
    const LatticeGraph g = testsup::unit_cell_graph();
    const auto params = testsup::unit_cell_params(g);
    const auto in = testsup::case_inputs(1);
    const DofMask mask = testsup::case_mask(in);
    const Eigen::VectorXd kdiag = testsup::case_ktilde(params, in.regime, KtildeMode::Midpoint, 0.0);

    // Engine side solves a system with one stiffness negated; the reference
    // keeps the true diagonal. The report must flag the mismatch.
    Eigen::VectorXd corrupted = kdiag;
    corrupted[5] = -corrupted[5];
    const SpMat atilde = assemble(g.incidence(), corrupted);
    const LinearSolveResult engine = solve_linear_system(atilde, mask);
    const auto snap = oracle::build_dense_snapshot(g.edges(), g.node_count(), kdiag);
    const auto ref = oracle::dense_solve(snap, mask);
    const auto report = oracle::compare_solutions(engine, ref, mask);
    REQUIRE_FALSE(report.pass(1e-8));
}

TEST_CASE("dense path refuses oversized problems", "[oracle]") {
    std::mt19937 rng(1);
    REQUIRE_THROWS_AS(oracle::build_dense_snapshot({{0, 1}}, 500, Eigen::VectorXd::Ones(1)),
                      std::invalid_argument);
}
