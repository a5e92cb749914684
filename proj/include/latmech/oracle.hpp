#pragma once

// Independent dense reference implementation used by tests and the verify
// command. It shares input types with the engine but none of the assembly
// or solve code: the incidence matrix and operator are accumulated densely
// edge by edge, systems are solved by dense factorizations, and the single
// bond solution is written out in closed form.

#include "latmech/constitutive.hpp"
#include "latmech/graph.hpp"
#include "latmech/linear_system.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <random>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

namespace latmech::oracle {

constexpr int kMaxDenseNodes = 200;

struct DenseSnapshot {
    Eigen::MatrixXd incidence;  // m x n
    Eigen::VectorXd kdiag;
    Eigen::MatrixXd atilde;  // n x n, accumulated in edge order
};

inline DenseSnapshot build_dense_snapshot(const std::vector<Edge>& edges, int node_count,
                                          const Eigen::VectorXd& kdiag) {
    if (node_count > kMaxDenseNodes)
        throw std::invalid_argument("oracle: dense path limited to 200 nodes");
    if (kdiag.size() != static_cast<Eigen::Index>(edges.size()))
        throw std::invalid_argument("oracle: one stiffness per edge required");
    DenseSnapshot snap;
    snap.incidence = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(edges.size()), node_count);
    snap.kdiag = kdiag;
    snap.atilde = Eigen::MatrixXd::Zero(node_count, node_count);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const int f = edges[i].first, s = edges[i].second;
        snap.incidence(static_cast<Eigen::Index>(i), f) = 1.0;
        snap.incidence(static_cast<Eigen::Index>(i), s) = -1.0;
        const double k = kdiag[static_cast<Eigen::Index>(i)];
        snap.atilde(f, f) += k;
        snap.atilde(s, s) += k;
        snap.atilde(f, s) -= k;
        snap.atilde(s, f) -= k;
    }
    return snap;
}

struct DenseSolveResult {
    NodalField solution;
    NodalField nodal_force;
    std::array<double, 3> residual{0.0, 0.0, 0.0};
};

// Dense partitioned solve of atilde * z = b per axis: free unknowns by
// rank-revealing QR, reactions by direct block products.
inline DenseSolveResult dense_solve(const DenseSnapshot& snap, const DofMask& mask) {
    const int n = static_cast<int>(snap.atilde.rows());
    if (mask.node_count() != n) throw std::invalid_argument("oracle: mask size mismatch");
    DenseSolveResult out;
    out.solution = NodalField::Zero(n, 3);
    out.nodal_force = NodalField::Zero(n, 3);

    for (int ax = 0; ax < 3; ++ax) {
        std::vector<int> p, q;
        for (int j = 0; j < n; ++j)
            (mask.kind[j][ax] == DofMask::Kind::Force ? p : q).push_back(j);
        const int np = static_cast<int>(p.size()), nq = static_cast<int>(q.size());

        Eigen::MatrixXd a11(np, np), a12(np, nq), a21(nq, np), a22(nq, nq);
        for (int r = 0; r < np; ++r)
            for (int c = 0; c < np; ++c) a11(r, c) = snap.atilde(p[r], p[c]);
        for (int r = 0; r < np; ++r)
            for (int c = 0; c < nq; ++c) a12(r, c) = snap.atilde(p[r], q[c]);
        for (int r = 0; r < nq; ++r)
            for (int c = 0; c < np; ++c) a21(r, c) = snap.atilde(q[r], p[c]);
        for (int r = 0; r < nq; ++r)
            for (int c = 0; c < nq; ++c) a22(r, c) = snap.atilde(q[r], q[c]);

        Eigen::VectorXd b_p(np), x_q(nq);
        for (int r = 0; r < np; ++r) b_p[r] = mask.value(p[r], ax);
        for (int r = 0; r < nq; ++r) x_q[r] = mask.value(q[r], ax);

        Eigen::VectorXd x_p(np);
        double residual = 0.0;
        if (np > 0) {
            const Eigen::VectorXd rhs = b_p - a12 * x_q;
            x_p = a11.colPivHouseholderQr().solve(rhs);
            residual = (a11 * x_p - rhs).norm() / (1.0 + rhs.norm());
        }
        const Eigen::VectorXd b_q = a22 * x_q + (np > 0 ? (a21 * x_p).eval() : Eigen::VectorXd::Zero(nq));

        out.residual[ax] = residual;
        for (int r = 0; r < np; ++r) {
            out.solution(p[r], ax) = x_p[r];
            out.nodal_force(p[r], ax) = b_p[r];
        }
        for (int r = 0; r < nq; ++r) {
            out.solution(q[r], ax) = x_q[r];
            out.nodal_force(q[r], ax) = b_q[r];
        }
    }
    return out;
}

// Literal normal-equation form of the regularized route, one axis.
inline Eigen::VectorXd dense_regularized(const Eigen::MatrixXd& a11, const Eigen::VectorXd& rhs,
                                         double theta) {
    const Eigen::Index np = a11.rows();
    if (np == 0) return {};
    const Eigen::MatrixXd normal =
        a11.transpose() * a11 + theta * theta * Eigen::MatrixXd::Identity(np, np);
    return normal.ldlt().solve(a11.transpose() * rhs);
}

// Closed-form state of one bond held at a given elongation at both ends:
// the transmitted force from the piecewise law (written out directly), the
// regime interval it falls in, and the reaction of the linearized system
// at the pulled end. Force formulas are deliberately restated here.
struct SingleBondSolution {
    double force = 0.0;
    Regime regime = Regime::TensileElastic;
    double reaction = 0.0;
};

inline SingleBondSolution single_bond_closed_form(const BondParams& p, double e,
                                                  KtildeMode mode, double epsilon) {
    SingleBondSolution out;
    const double b = p.ref_length;
    double klin = 0.0;
    if (e < 0.0) {
        out.regime = Regime::CompressiveElastic;
        out.force = p.f0 * e / p.x0;
        klin = 0.5 * p.f0 / (b + p.x0);
    } else if (e < p.x1) {
        out.regime = Regime::TensileElastic;
        out.force = p.f1 * e / p.x1;
        klin = 0.5 * p.f1 / (b + p.x1);
    } else if (e < p.x2) {
        out.regime = Regime::PlasticPlateau;
        out.force = p.f1;
        klin = mode == KtildeMode::Midpoint
                   ? 0.5 * (p.f1 / (b + p.x2) + p.f1 / (b + p.x1))
                   : p.f1 * (p.x2 - p.x1) / (2.0 * (b + p.x1) * (b + p.x2));
    } else if (e < p.x3) {
        out.regime = Regime::Softening;
        out.force = p.f1 * (p.x3 - e) / (p.x3 - p.x2);
        klin = mode == KtildeMode::Midpoint
                   ? 0.5 * p.f1 / (b + p.x2)
                   : p.f1 * (p.x3 - b) / (2.0 * (p.x3 + b) * (p.x2 + b));
    } else {
        out.regime = Regime::Failed;
        out.force = 0.0;
        klin = 0.0;
    }
    if (std::abs(klin) < epsilon) klin = std::copysign(epsilon, klin == 0.0 ? 1.0 : klin);
    out.reaction = klin * e;
    return out;
}

// Seeded graphs and masks for randomized verification.
inline LatticeGraph random_graph(std::mt19937& rng, int node_count, int extra_edges) {
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    NodalField pos(node_count, 3);
    for (int j = 0; j < node_count; ++j) pos.row(j) << coord(rng), coord(rng), coord(rng);

    std::vector<Edge> edges;
    std::set<std::pair<int, int>> seen;
    for (int j = 1; j < node_count; ++j) {
        std::uniform_int_distribution<int> pick(0, j - 1);
        const int other = pick(rng);
        edges.push_back({j, other});
        seen.emplace(other, j);
    }
    std::uniform_int_distribution<int> any(0, node_count - 1);
    int attempts = 0;
    while (extra_edges > 0 && attempts < 100 * extra_edges) {
        ++attempts;
        int u = any(rng), v = any(rng);
        if (u == v) continue;
        const auto key = std::minmax(u, v);
        if (!seen.emplace(key.first, key.second).second) continue;
        edges.push_back({std::max(u, v), std::min(u, v)});
        --extra_edges;
    }
    return LatticeGraph(std::move(pos), std::move(edges));
}

inline std::vector<BondParams> random_params(std::mt19937& rng, const LatticeGraph& g) {
    std::uniform_real_distribution<double> mag(0.05, 0.5);
    std::uniform_real_distribution<double> force(0.05, 2.0);
    std::vector<BondParams> params(g.edge_count());
    for (int i = 0; i < g.edge_count(); ++i) {
        BondParams& p = params[i];
        p.ref_length = g.reference_lengths()[i];
        p.x0 = -std::min(mag(rng), 0.45 * p.ref_length);
        p.x1 = mag(rng);
        p.x2 = p.x1 + mag(rng);
        p.x3 = p.x2 + mag(rng);
        p.f0 = -force(rng);
        p.f1 = force(rng);
        p.validate();
    }
    return params;
}

// Prescribes every axis of a random nonempty node subset (plus small random
// applied forces elsewhere) so the free block stays nonsingular on a
// connected graph with positive stiffnesses.
inline DofMask random_mask(std::mt19937& rng, int node_count, double scale = 0.1) {
    std::uniform_real_distribution<double> val(-scale, scale);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    DofMask mask(node_count);
    bool any = false;
    for (int j = 0; j < node_count; ++j)
        if (coin(rng) < 0.3) {
            any = true;
            for (int ax = 0; ax < 3; ++ax) mask.prescribe_displacement(j, ax, val(rng));
        } else {
            for (int ax = 0; ax < 3; ++ax) mask.set_force(j, ax, val(rng));
        }
    if (!any)
        for (int ax = 0; ax < 3; ++ax) mask.prescribe_displacement(0, ax, val(rng));
    return mask;
}

// Engine-versus-oracle discrepancy report for one linearized system.
struct VerifyReport {
    double max_rel_solution = 0.0;  // over free dofs
    double max_rel_reaction = 0.0;  // over prescribed dofs
    double max_residual = 0.0;      // engine equilibrium residual, all axes

    bool pass(double tol = 1e-8) const {
        return max_rel_solution <= tol && max_rel_reaction <= tol && max_residual <= tol;
    }
};

inline VerifyReport compare_solutions(const LinearSolveResult& engine, const DenseSolveResult& ref,
                                      const DofMask& mask) {
    VerifyReport rep;
    double sol_scale = 0.0, rea_scale = 0.0, sol_diff = 0.0, rea_diff = 0.0;
    for (int j = 0; j < mask.node_count(); ++j)
        for (int ax = 0; ax < 3; ++ax) {
            const double d = std::abs(engine.solution(j, ax) - ref.solution(j, ax));
            const double df = std::abs(engine.nodal_force(j, ax) - ref.nodal_force(j, ax));
            if (mask.kind[j][ax] == DofMask::Kind::Force) {
                sol_diff = std::max(sol_diff, d);
                sol_scale = std::max(sol_scale, std::abs(ref.solution(j, ax)));
            } else {
                rea_diff = std::max(rea_diff, df);
                rea_scale = std::max(rea_scale, std::abs(ref.nodal_force(j, ax)));
            }
        }
    rep.max_rel_solution = sol_diff / (1.0 + sol_scale);
    rep.max_rel_reaction = rea_diff / (1.0 + rea_scale);
    for (int ax = 0; ax < 3; ++ax) rep.max_residual = std::max(rep.max_residual, engine.residual[ax]);
    return rep;
}

// Runs both paths on identical inputs and reports the discrepancies.
inline VerifyReport verify_linear_system(const LatticeGraph& g, const Eigen::VectorXd& kdiag,
                                         const DofMask& mask, double theta = 1e-8) {
    const SpMat atilde = assemble(g.incidence(), kdiag);
    const LinearSolveResult engine = solve_linear_system(atilde, mask, {theta, 1e-10});
    const DenseSnapshot snap = build_dense_snapshot(g.edges(), g.node_count(), kdiag);
    const DenseSolveResult ref = dense_solve(snap, mask);
    return compare_solutions(engine, ref, mask);
}

}  // namespace latmech::oracle
