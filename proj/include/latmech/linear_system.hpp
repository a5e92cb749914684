#pragma once

// Linearized equilibrium system: assembly of Atilde = A^T Ktilde A with a
// scalar stiffness per edge, partitioning by the boundary mask into free (p)
// and prescribed (q) blocks per coordinate axis, and the two solution
// routes for the free unknowns: direct sparse elimination and Tikhonov-
// regularized least squares for rank-deficient blocks.

#include "latmech/graph.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace latmech {

using SpMat = Eigen::SparseMatrix<double>;

// Per node, per axis, exactly one of: a free dof carrying an applied force,
// or a prescribed displacement. The solve returns the conjugate quantity.
struct DofMask {
    enum class Kind : std::uint8_t { Force = 0, Displacement = 1 };

    explicit DofMask(int node_count)
        : kind(node_count, {Kind::Force, Kind::Force, Kind::Force}),
          value(NodalField::Zero(node_count, 3)) {}

    std::vector<std::array<Kind, 3>> kind;
    NodalField value;  // displacement for prescribed dofs, force otherwise

    int node_count() const { return static_cast<int>(kind.size()); }

    void prescribe_displacement(int node, int axis, double u) {
        kind.at(node)[check_axis(axis)] = Kind::Displacement;
        value(node, axis) = u;
    }
    void set_force(int node, int axis, double f) {
        kind.at(node)[check_axis(axis)] = Kind::Force;
        value(node, axis) = f;
    }

    int prescribed_count() const {
        int c = 0;
        for (const auto& k : kind)
            for (int ax = 0; ax < 3; ++ax)
                if (k[ax] == Kind::Displacement) ++c;
        return c;
    }

    void validate() const {
        if (prescribed_count() == 0)
            throw std::invalid_argument("DofMask: system has no prescribed displacement");
    }

private:
    static int check_axis(int axis) {
        if (axis < 0 || axis > 2) throw std::invalid_argument("DofMask: axis must be 0, 1 or 2");
        return axis;
    }
};

// Atilde = A^T diag(k) A, built edge by edge: bond i adds +k_i to both
// endpoint diagonals and -k_i to the off-diagonal pair. Entries may be
// negative (compressive bonds); non-finite entries are rejected.
inline SpMat assemble(const IncidenceOperator& a, const Eigen::VectorXd& kdiag) {
    if (kdiag.size() != a.rows())
        throw std::invalid_argument("assemble: stiffness diagonal has " +
                                    std::to_string(kdiag.size()) + " entries, expected " +
                                    std::to_string(a.rows()));
    const int n = static_cast<int>(a.cols());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(4 * a.rows());
    for (int i = 0; i < a.rows(); ++i) {
        const double k = kdiag[i];
        if (!std::isfinite(k))
            throw std::invalid_argument("assemble: non-finite stiffness at edge " +
                                        std::to_string(i));
        int fst = -1, snd = -1;
        for (IncidenceOperator::InnerIterator it(a, i); it; ++it)
            (it.value() > 0.0 ? fst : snd) = static_cast<int>(it.col());
        triplets.emplace_back(fst, fst, k);
        triplets.emplace_back(snd, snd, k);
        triplets.emplace_back(fst, snd, -k);
        triplets.emplace_back(snd, fst, -k);
    }
    SpMat atilde(n, n);
    atilde.setFromTriplets(triplets.begin(), triplets.end());
    atilde.makeCompressed();
    return atilde;
}

// One axis of the partitioned system.
struct AxisBlocks {
    std::vector<int> free_nodes;        // p, ascending node id
    std::vector<int> prescribed_nodes;  // q, ascending node id
    SpMat a11, a12, a21, a22;
    Eigen::VectorXd b_p;  // applied forces at free dofs
    Eigen::VectorXd x_q;  // prescribed values at fixed dofs
};

struct PartitionedSystem {
    std::array<AxisBlocks, 3> axis;
};

inline PartitionedSystem partition(const SpMat& atilde, const DofMask& mask) {
    const int n = static_cast<int>(atilde.rows());
    if (mask.node_count() != n)
        throw std::invalid_argument("partition: mask covers " + std::to_string(mask.node_count()) +
                                    " nodes, operator has " + std::to_string(n));
    PartitionedSystem sys;
    for (int ax = 0; ax < 3; ++ax) {
        AxisBlocks& blk = sys.axis[ax];
        std::vector<int> local(n, -1);
        for (int j = 0; j < n; ++j) {
            if (mask.kind[j][ax] == DofMask::Kind::Force) {
                local[j] = static_cast<int>(blk.free_nodes.size());
                blk.free_nodes.push_back(j);
            } else {
                local[j] = static_cast<int>(blk.prescribed_nodes.size());
                blk.prescribed_nodes.push_back(j);
            }
        }
        const int np = static_cast<int>(blk.free_nodes.size());
        const int nq = static_cast<int>(blk.prescribed_nodes.size());

        std::vector<Eigen::Triplet<double>> t11, t12, t21, t22;
        for (int col = 0; col < atilde.outerSize(); ++col)
            for (SpMat::InnerIterator it(atilde, col); it; ++it) {
                const int r = static_cast<int>(it.row());
                const int c = static_cast<int>(it.col());
                const bool rfree = mask.kind[r][ax] == DofMask::Kind::Force;
                const bool cfree = mask.kind[c][ax] == DofMask::Kind::Force;
                if (rfree && cfree)
                    t11.emplace_back(local[r], local[c], it.value());
                else if (rfree)
                    t12.emplace_back(local[r], local[c], it.value());
                else if (cfree)
                    t21.emplace_back(local[r], local[c], it.value());
                else
                    t22.emplace_back(local[r], local[c], it.value());
            }
        blk.a11.resize(np, np);
        blk.a12.resize(np, nq);
        blk.a21.resize(nq, np);
        blk.a22.resize(nq, nq);
        blk.a11.setFromTriplets(t11.begin(), t11.end());
        blk.a12.setFromTriplets(t12.begin(), t12.end());
        blk.a21.setFromTriplets(t21.begin(), t21.end());
        blk.a22.setFromTriplets(t22.begin(), t22.end());

        blk.b_p.resize(np);
        blk.x_q.resize(nq);
        for (int j = 0; j < np; ++j) blk.b_p[j] = mask.value(blk.free_nodes[j], ax);
        for (int j = 0; j < nq; ++j) blk.x_q[j] = mask.value(blk.prescribed_nodes[j], ax);
    }
    return sys;
}

namespace detail {

// Hager-style 1-norm estimate of the inverse through an existing
// factorization; the block is symmetric so no transposed solves are needed.
template <class Solver>
double inverse_one_norm_estimate(const Solver& solver, int n) {
    if (n == 0) return 0.0;
    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / n);
    double est = 0.0;
    for (int iter = 0; iter < 5; ++iter) {
        Eigen::VectorXd z = solver.solve(x);
        est = std::max(est, z.template lpNorm<1>());
        Eigen::VectorXd xi(n);
        for (int j = 0; j < n; ++j) xi[j] = z[j] >= 0.0 ? 1.0 : -1.0;
        Eigen::VectorXd w = solver.solve(xi);
        int jmax = 0;
        const double winf = w.cwiseAbs().maxCoeff(&jmax);
        if (winf <= w.dot(x)) break;
        x.setZero();
        x[jmax] = 1.0;
    }
    return est;
}

inline double one_norm(const SpMat& m) {
    double best = 0.0;
    for (int col = 0; col < m.outerSize(); ++col) {
        double s = 0.0;
        for (SpMat::InnerIterator it(m, col); it; ++it) s += std::abs(it.value());
        best = std::max(best, s);
    }
    return best;
}

}  // namespace detail

struct FreeSolveReport {
    bool ok = false;
    Eigen::VectorXd x_p;
    double residual = 0.0;       // relative to 1 + |rhs|
    double condition_est = 0.0;  // 1-norm estimate
    std::string failure;
};

// Factorization of one free block, reusable across right-hand sides (the
// three axes share it whenever their masks coincide).
class FreeBlockSolver {
public:
    explicit FreeBlockSolver(const SpMat& a11) : a11_(a11), n_(static_cast<int>(a11.rows())) {
        if (n_ == 0) {
            factor_ok_ = true;
            return;
        }
        lu_.compute(a11_);
        factor_ok_ = lu_.info() == Eigen::Success;
        if (factor_ok_)
            condition_est_ = detail::one_norm(a11_) * detail::inverse_one_norm_estimate(lu_, n_);
    }

    double condition_estimate() const { return condition_est_; }

    FreeSolveReport solve(const Eigen::VectorXd& rhs, double residual_tol) const {
        FreeSolveReport rep;
        rep.condition_est = condition_est_;
        if (n_ == 0) {
            rep.ok = true;  // nothing to solve, reaction recovery only
            return rep;
        }
        if (!factor_ok_) {
            rep.failure = "factorization failed (singular block)";
            return rep;
        }
        rep.x_p = lu_.solve(rhs);
        rep.residual = (a11_ * rep.x_p - rhs).norm() / (1.0 + rhs.norm());
        const double cond_limit = 1.0 / (100.0 * std::numeric_limits<double>::epsilon());
        if (!rep.x_p.allFinite() || condition_est_ > cond_limit) {
            rep.failure = "ill-conditioned block (estimate " + std::to_string(condition_est_) + ")";
            return rep;
        }
        if (rep.residual > residual_tol) {
            rep.failure = "residual " + std::to_string(rep.residual) + " above tolerance";
            return rep;
        }
        rep.ok = true;
        return rep;
    }

private:
    SpMat a11_;
    int n_ = 0;
    bool factor_ok_ = false;
    double condition_est_ = 0.0;
    Eigen::SparseLU<SpMat> lu_;
};

// Direct route: x_p = A11^{-1} (b_p - A12 x_q). Reports failure (rather than
// throwing) when the block is singular or ill-conditioned so the caller can
// fall back to the regularized route.
inline FreeSolveReport solve_free(const AxisBlocks& blk, double residual_tol = 1e-10) {
    const FreeBlockSolver solver(blk.a11);
    const Eigen::VectorXd rhs = blk.free_nodes.empty()
                                    ? Eigen::VectorXd{}
                                    : Eigen::VectorXd(blk.b_p - blk.a12 * blk.x_q);
    return solver.solve(rhs, residual_tol);
}

// Spectral norm theta of the regularizer E = theta * I on the free dofs.
struct RegularizerSpec {
    double theta = 1e-8;

    void validate() const {
        if (!(theta > 0.0)) throw std::invalid_argument("RegularizerSpec: theta must be positive");
    }
};

// Regularized route: the unique minimizer of
//   H1(z) = |(b_p - A12 x_q) - A11 z|^2 + |E z|^2,
// formed through the normal equations (A11^T A11 + theta^2 I) z = A11^T rhs,
// which are positive definite for any theta > 0.
inline Eigen::VectorXd solve_regularized(const AxisBlocks& blk, const RegularizerSpec& reg) {
    reg.validate();
    const int np = static_cast<int>(blk.free_nodes.size());
    if (np == 0) return Eigen::VectorXd{};
    const Eigen::VectorXd rhs = blk.b_p - blk.a12 * blk.x_q;

    SpMat normal = SpMat(blk.a11.transpose()) * blk.a11;
    SpMat identity(np, np);
    identity.setIdentity();
    normal += (reg.theta * reg.theta) * identity;

    Eigen::SimplicialLDLT<SpMat> ldlt;
    ldlt.compute(normal);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("solve_regularized: normal-equation factorization failed");
    return ldlt.solve(blk.a11.transpose() * rhs);
}

// B_q = A21 x_p + A22 x_q.
inline Eigen::VectorXd recover_reactions(const AxisBlocks& blk, const Eigen::VectorXd& x_p) {
    if (x_p.size() != static_cast<Eigen::Index>(blk.free_nodes.size()))
        throw std::invalid_argument("recover_reactions: x_p size mismatch");
    Eigen::VectorXd b_q = blk.a22 * blk.x_q;
    if (x_p.size() > 0) b_q += blk.a21 * x_p;
    return b_q;
}

// Objective of the regularized route, for minimality checks.
inline double h1_objective(const AxisBlocks& blk, const RegularizerSpec& reg,
                           const Eigen::VectorXd& z) {
    const Eigen::VectorXd rhs = blk.b_p - blk.a12 * blk.x_q;
    return (rhs - blk.a11 * z).squaredNorm() + (reg.theta * z).squaredNorm();
}

struct LinearSolveOptions {
    double theta = 1e-8;
    double residual_tol = 1e-10;
};

// Full-field result of one linear solve: solved displacements merged with
// the prescribed values, and the conjugate force field (applied forces at
// free dofs, recovered reactions at prescribed dofs).
struct LinearSolveResult {
    NodalField solution;
    NodalField nodal_force;
    std::array<bool, 3> regularized{false, false, false};
    std::array<double, 3> residual{0.0, 0.0, 0.0};
    std::array<double, 3> condition_est{0.0, 0.0, 0.0};

    bool any_regularized() const { return regularized[0] || regularized[1] || regularized[2]; }
};

// Solves all three axes against one assembled operator. Axes with identical
// masks share one factorization; the per-axis direct solve falls back to the
// regularized route when the free block is singular or ill-conditioned.
inline LinearSolveResult solve_linear_system(const SpMat& atilde, const DofMask& mask,
                                             const LinearSolveOptions& opts = {}) {
    const int n = static_cast<int>(atilde.rows());
    PartitionedSystem sys = partition(atilde, mask);
    LinearSolveResult out;
    out.solution = NodalField::Zero(n, 3);
    out.nodal_force = NodalField::Zero(n, 3);

    std::array<std::shared_ptr<FreeBlockSolver>, 3> solvers;
    for (int ax = 0; ax < 3; ++ax) {
        for (int prev = 0; prev < ax; ++prev)
            if (sys.axis[prev].free_nodes == sys.axis[ax].free_nodes) {
                solvers[ax] = solvers[prev];
                break;
            }
        if (!solvers[ax]) solvers[ax] = std::make_shared<FreeBlockSolver>(sys.axis[ax].a11);
    }

    for (int ax = 0; ax < 3; ++ax) {
        const AxisBlocks& blk = sys.axis[ax];
        const bool empty = blk.free_nodes.empty();
        const Eigen::VectorXd rhs =
            empty ? Eigen::VectorXd{} : Eigen::VectorXd(blk.b_p - blk.a12 * blk.x_q);
        FreeSolveReport rep = solvers[ax]->solve(rhs, opts.residual_tol);
        Eigen::VectorXd x_p;
        if (rep.ok) {
            x_p = empty ? Eigen::VectorXd{} : rep.x_p;
        } else {
            x_p = solve_regularized(blk, {opts.theta});
            out.regularized[ax] = true;
            rep.residual = empty ? 0.0 : (blk.a11 * x_p - rhs).norm() / (1.0 + rhs.norm());
        }
        out.residual[ax] = rep.residual;
        out.condition_est[ax] = rep.condition_est;

        const Eigen::VectorXd b_q = recover_reactions(blk, x_p);
        for (std::size_t j = 0; j < blk.free_nodes.size(); ++j) {
            out.solution(blk.free_nodes[j], ax) = x_p[static_cast<Eigen::Index>(j)];
            out.nodal_force(blk.free_nodes[j], ax) = blk.b_p[static_cast<Eigen::Index>(j)];
        }
        for (std::size_t j = 0; j < blk.prescribed_nodes.size(); ++j) {
            out.solution(blk.prescribed_nodes[j], ax) = blk.x_q[static_cast<Eigen::Index>(j)];
            out.nodal_force(blk.prescribed_nodes[j], ax) = b_q[static_cast<Eigen::Index>(j)];
        }
    }
    return out;
}

}  // namespace latmech
