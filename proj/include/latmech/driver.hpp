#pragma once

// Displacement-controlled load stepping. Each step fixes the prescribed
// values at the current ramp fraction and runs a secant-stiffness fixed
// point: classify bond regimes from the current elongations, build the
// regime-wise diagonal stiffness, solve the linearized system for the free
// displacements, reclassify, and repeat until the regime set is stable and
// the elongations have stopped moving. Failure is irreversible across
// converged steps.

#include "latmech/constitutive.hpp"
#include "latmech/graph.hpp"
#include "latmech/linear_system.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace latmech {

struct SolveOptions {
    int max_regime_iters = 50;
    std::optional<double> tol_e;    // default 1e-10 * min reference length
    double tol_r = 1e-10;           // relative residual accepted by the direct solve
    KtildeMode mode = KtildeMode::Midpoint;
    std::optional<double> epsilon;  // stiffness floor, default 1e-9 * max f1/x1
    double theta = 1e-8;            // regularizer norm for the fallback route
    int load_steps = 1;
    bool irreversible_damage = true;

    void validate() const {
        if (max_regime_iters < 1) throw std::invalid_argument("SolveOptions: max_regime_iters >= 1");
        if (load_steps < 1) throw std::invalid_argument("SolveOptions: load_steps >= 1");
        if (!(tol_r > 0.0) || !(theta > 0.0) || (tol_e && !(*tol_e > 0.0)))
            throw std::invalid_argument("SolveOptions: tolerances must be positive");
        if (epsilon && !(*epsilon >= 0.0))
            throw std::invalid_argument("SolveOptions: epsilon must be nonnegative");
    }

    double resolve_tol_e(const LatticeGraph& g) const {
        return tol_e ? *tol_e : 1e-10 * g.reference_lengths().minCoeff();
    }
    double resolve_epsilon(const std::vector<BondParams>& params) const {
        if (epsilon) return *epsilon;
        double scale = 0.0;
        for (const auto& p : params) scale = std::max(scale, p.f1 / p.x1);
        return 1e-9 * scale;
    }
};

// Pins bonds whose regime keeps flipping back and forth within one load
// step: after two reversals the bond is held at the more damaged of the two
// regimes for the remainder of the step.
class RegimeOscillationGuard {
public:
    explicit RegimeOscillationGuard(int edge_count) : slots_(edge_count) {}

    Regime apply(int edge, Regime proposed) {
        Slot& s = slots_[edge];
        if (s.pinned) return s.pin;
        if (s.len >= 2 && proposed == s.prev2 && proposed != s.prev) {
            if (++s.reversals >= 2) {
                s.pinned = true;
                s.pin = std::max(s.prev, proposed);
                return s.pin;
            }
        }
        s.prev2 = s.prev;
        s.prev = proposed;
        s.len = std::min(s.len + 1, 2);
        return proposed;
    }

    bool pinned(int edge) const { return slots_[edge].pinned; }

    std::vector<int> pinned_edges() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < slots_.size(); ++i)
            if (slots_[i].pinned) out.push_back(static_cast<int>(i));
        return out;
    }

private:
    struct Slot {
        Regime prev = Regime::TensileElastic;
        Regime prev2 = Regime::TensileElastic;
        int len = 0;
        int reversals = 0;
        bool pinned = false;
        Regime pin = Regime::TensileElastic;
    };
    std::vector<Slot> slots_;
};

// Converged snapshot of one load step.
struct StepState {
    NodalField positions;        // X = reference + displacement
    NodalField displacements;    // the solved field
    EdgeField edge_vectors;      // y = A X
    Eigen::VectorXd elongations; // |y| - |b|
    std::vector<Regime> regimes;
    Eigen::VectorXd ktilde;      // diagonal used for the converged solve
    EdgeField forces;            // bond-law force vectors along y
    NodalField nodal_forces;     // applied forces at free dofs, reactions at fixed
    std::vector<int> failed_edges;  // cumulative failed set after this step
};

struct StepLog {
    int step = 0;
    double fraction = 1.0;
    int iterations = 0;
    bool converged = false;
    double max_delta_e = 0.0;
    int regime_changes = 0;  // summed over iterations
    std::array<bool, 3> regularized{false, false, false};
    std::array<double, 3> residual{0.0, 0.0, 0.0};
    std::vector<int> pinned_edges;
    int out_of_range_count = 0;  // elongations below x0 seen at convergence
};

struct DamageMetrics {
    std::array<long, 5> regime_counts{};
    double stiffness_ratio = 1.0;  // sum |ktilde| over sum of pristine values
    std::vector<int> failed_edges;
};

struct SolveResult {
    std::vector<StepState> steps;
    std::vector<StepLog> log;
    bool converged = false;
    bool used_regularized = false;
    DamageMetrics damage;

    const StepState& final_state() const {
        if (steps.empty()) throw std::logic_error("SolveResult: no steps recorded");
        return steps.back();
    }
};

// Regime histogram and stiffness-remaining fraction of a state. The ratio
// compares current |ktilde| magnitudes against the pristine tensile-elastic
// diagonal built from the same mode and floor; it sits in [0, 1] once
// damage accumulates under tension, but can exceed 1 while bonds are
// compressed (the compressive secant can outweigh the tensile one).
inline DamageMetrics damage_metrics(const StepState& state, const std::vector<BondParams>& params,
                                    KtildeMode mode, double epsilon) {
    DamageMetrics m;
    m.failed_edges = state.failed_edges;
    double current = 0.0, pristine = 0.0;
    for (std::size_t i = 0; i < state.regimes.size(); ++i) {
        ++m.regime_counts[static_cast<int>(state.regimes[i])];
        current += std::abs(state.ktilde[static_cast<Eigen::Index>(i)]);
        pristine += std::abs(ktilde_entry(Regime::TensileElastic, params[i], mode, epsilon).value);
    }
    m.stiffness_ratio = pristine > 0.0 ? current / pristine : 1.0;
    return m;
}

namespace detail {

inline void check_problem(const LatticeGraph& g, const std::vector<BondParams>& params,
                          const DofMask& mask) {
    if (static_cast<int>(params.size()) != g.edge_count())
        throw std::invalid_argument("driver: need one BondParams per edge");
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i].validate();
        const double len = g.reference_lengths()[static_cast<Eigen::Index>(i)];
        if (std::abs(params[i].ref_length - len) > 1e-9 * len)
            throw std::invalid_argument("driver: BondParams " + std::to_string(i) +
                                        " carries reference length " +
                                        std::to_string(params[i].ref_length) +
                                        " but the edge measures " + std::to_string(len));
    }
    if (mask.node_count() != g.node_count())
        throw std::invalid_argument("driver: mask node count mismatch");
    mask.validate();
}

inline DofMask scaled_mask(const DofMask& mask, double fraction) {
    DofMask out = mask;
    out.value *= fraction;
    return out;
}

}  // namespace detail

// Runs the given ramp fractions (monotone nondecreasing, positive) against
// the final prescribed values in `mask`; both prescribed displacements and
// applied forces scale proportionally. Each step warm-starts from the
// previous converged state. Non-convergence is flagged on the result, never
// thrown.
inline SolveResult run_load_steps(const LatticeGraph& g, const std::vector<BondParams>& params,
                                  const DofMask& mask, const std::vector<double>& fractions,
                                  const SolveOptions& options = {}) {
    options.validate();
    detail::check_problem(g, params, mask);
    if (fractions.empty()) throw std::invalid_argument("run_load_steps: empty schedule");
    for (std::size_t s = 0; s < fractions.size(); ++s)
        if (!(fractions[s] > 0.0) || (s > 0 && fractions[s] < fractions[s - 1]))
            throw std::invalid_argument("run_load_steps: schedule must be positive and monotone");

    const int m = g.edge_count();
    const double tol_e = options.resolve_tol_e(g);
    const double eps = options.resolve_epsilon(params);
    const IncidenceOperator& a = g.incidence();
    const NodalField& ref = g.reference_positions();

    SolveResult result;
    result.converged = true;

    NodalField u = NodalField::Zero(g.node_count(), 3);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
    std::vector<bool> failed(m, false);

    for (std::size_t s = 0; s < fractions.size(); ++s) {
        const DofMask step_mask = detail::scaled_mask(mask, fractions[s]);
        StepLog log;
        log.step = static_cast<int>(s) + 1;
        log.fraction = fractions[s];

        std::vector<Regime> regimes(m);
        for (int i = 0; i < m; ++i)
            regimes[i] = failed[i] ? Regime::Failed : classify_regime(e[i], params[i]).regime;

        RegimeOscillationGuard guard(m);
        for (int i = 0; i < m; ++i) guard.apply(i, regimes[i]);
        Eigen::VectorXd kdiag(m);
        LinearSolveResult lin;

        for (int iter = 1; iter <= options.max_regime_iters; ++iter) {
            log.iterations = iter;
            for (int i = 0; i < m; ++i) {
                kdiag[i] = ktilde_entry(regimes[i], params[i], options.mode, eps).value;
                // Negative stiffness is legitimate only on the compressive
                // branch, and on the softening branch of the literal mode.
                const bool may_be_negative =
                    regimes[i] == Regime::CompressiveElastic ||
                    (regimes[i] == Regime::Softening && options.mode == KtildeMode::PaperLiteral);
                if (kdiag[i] < 0.0 && !may_be_negative)
                    throw std::logic_error("driver: negative stiffness for regime " +
                                           std::string(to_string(regimes[i])) + " on edge " +
                                           std::to_string(i));
            }

            const SpMat atilde = assemble(a, kdiag);
            lin = solve_linear_system(atilde, step_mask, {options.theta, options.tol_r});
            u = lin.solution;

            const EdgeField y = gradient(a, NodalField(ref + u));
            const Eigen::VectorXd e_new = y.rowwise().norm() - g.reference_lengths();

            int changes = 0;
            for (int i = 0; i < m; ++i) {
                Regime next = failed[i] ? Regime::Failed
                                        : guard.apply(i, classify_regime(e_new[i], params[i]).regime);
                if (next != regimes[i]) {
                    ++changes;
                    regimes[i] = next;
                }
            }
            log.regime_changes += changes;
            log.max_delta_e = (e_new - e).lpNorm<Eigen::Infinity>();
            e = e_new;
            if (changes == 0 && log.max_delta_e <= tol_e) {
                log.converged = true;
                break;
            }
        }

        log.residual = lin.residual;
        log.regularized = lin.regularized;
        log.pinned_edges = guard.pinned_edges();
        for (int i = 0; i < m; ++i)
            if (classify_regime(e[i], params[i]).below_range) ++log.out_of_range_count;
        if (lin.any_regularized()) result.used_regularized = true;
        if (!log.converged) result.converged = false;

        // Failure becomes persistent once a converged step ends with the
        // bond failed; a non-converged best iterate does not commit damage.
        if (options.irreversible_damage && log.converged)
            for (int i = 0; i < m; ++i)
                if (regimes[i] == Regime::Failed) failed[i] = true;

        StepState state;
        state.displacements = u;
        state.positions = ref + u;
        state.edge_vectors = gradient(a, state.positions);
        state.elongations = e;
        state.regimes = regimes;
        state.ktilde = kdiag;
        state.forces.resize(m, 3);
        for (int i = 0; i < m; ++i) {
            const double len = state.edge_vectors.row(i).norm();
            const double f = axial_force(e[i], params[i]);
            if (len > 0.0)
                state.forces.row(i) = (f / len) * state.edge_vectors.row(i);
            else
                state.forces.row(i).setZero();
        }
        state.nodal_forces = lin.nodal_force;
        for (int i = 0; i < m; ++i)
            if (failed[i] || (!options.irreversible_damage && regimes[i] == Regime::Failed))
                state.failed_edges.push_back(i);

        result.steps.push_back(std::move(state));
        result.log.push_back(std::move(log));
    }

    result.damage = damage_metrics(result.final_state(), params, options.mode, eps);
    return result;
}

// Linear ramp to the final prescribed values over options.load_steps.
inline SolveResult solve_nonlinear(const LatticeGraph& g, const std::vector<BondParams>& params,
                                   const DofMask& mask, const SolveOptions& options = {}) {
    options.validate();
    std::vector<double> fractions(options.load_steps);
    for (int s = 0; s < options.load_steps; ++s)
        fractions[s] = static_cast<double>(s + 1) / options.load_steps;
    return run_load_steps(g, params, mask, fractions, options);
}

}  // namespace latmech
