#pragma once

// Piecewise force-elongation law of a single bond and its regime-wise
// linearization. A bond is linear elastic in compression and in early
// tension, carries a constant force over the plastic plateau, sheds force
// linearly over the softening branch, and transmits nothing once failed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace latmech {

// Breakpoints and force levels of the bond law, in elongation units.
// x0 < 0 < x1 < x2 < x3 bound the compressive, tensile-elastic, plateau
// and softening intervals; f0 < 0 < f1 are the forces reached at x0 and x1.
struct BondParams {
    double x0 = -0.1;
    double x1 = 0.1;
    double x2 = 0.3;
    double x3 = 0.4;
    double f0 = -0.1;
    double f1 = 0.1;
    double ref_length = 1.0;  // |b|

    void validate() const {
        if (!(x0 < 0.0 && 0.0 < x1 && x1 < x2 && x2 < x3))
            throw std::invalid_argument("BondParams: need x0 < 0 < x1 < x2 < x3");
        if (!(f0 < 0.0 && 0.0 < f1))
            throw std::invalid_argument("BondParams: need f0 < 0 < f1");
        if (!(ref_length > 0.0))
            throw std::invalid_argument("BondParams: reference length must be positive");
        if (!(ref_length + x0 > 0.0))
            throw std::invalid_argument("BondParams: fully compressed length |b|+x0 must stay positive");
    }
};

// Ordered by accumulated damage; the oscillation guard relies on this order.
enum class Regime : std::uint8_t {
    CompressiveElastic = 0,
    TensileElastic = 1,
    PlasticPlateau = 2,
    Softening = 3,
    Failed = 4,
};

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::CompressiveElastic: return "compressive_elastic";
        case Regime::TensileElastic: return "tensile_elastic";
        case Regime::PlasticPlateau: return "plastic_plateau";
        case Regime::Softening: return "softening";
        case Regime::Failed: return "failed";
    }
    return "unknown";
}

struct RegimeClass {
    Regime regime = Regime::TensileElastic;
    // Set when the elongation undershoots x0; the compressive branch is
    // extended linearly there instead of extrapolating silently.
    bool below_range = false;
};

// Total over all elongations. Intervals are half-open [left, right):
// [x0,0) compressive, [0,x1) tensile, [x1,x2) plateau, [x2,x3) softening,
// [x3,inf) failed; e < x0 classifies compressive with the out-of-range flag.
inline RegimeClass classify_regime(double e, const BondParams& p) {
    if (e < p.x0) return {Regime::CompressiveElastic, true};
    if (e < 0.0) return {Regime::CompressiveElastic, false};
    if (e < p.x1) return {Regime::TensileElastic, false};
    if (e < p.x2) return {Regime::PlasticPlateau, false};
    if (e < p.x3) return {Regime::Softening, false};
    return {Regime::Failed, false};
}

// Signed axial force at elongation e. Continuous on [x0, inf) and extended
// linearly below x0.
inline double axial_force(double e, const BondParams& p) {
    switch (classify_regime(e, p).regime) {
        case Regime::CompressiveElastic: return (p.f0 / p.x0) * e;
        case Regime::TensileElastic: return (p.f1 / p.x1) * e;
        case Regime::PlasticPlateau: return p.f1;
        case Regime::Softening: return p.f1 * (p.x3 - e) / (p.x3 - p.x2);
        case Regime::Failed: return 0.0;
    }
    return 0.0;
}

struct SecantBounds {
    double lower = 0.0;
    double upper = 0.0;
};

// Exact infimum and supremum of the signed secant ratio F/|y| over a
// regime's elongation interval, |y| = |b| + e. The compressive bound is
// negative: a shortened bond pushes its nodes apart.
inline SecantBounds secant_ratio_bounds(Regime regime, const BondParams& p) {
    switch (regime) {
        case Regime::CompressiveElastic:
            return {p.f0 / (p.ref_length + p.x0), 0.0};
        case Regime::TensileElastic:
            return {0.0, p.f1 / (p.ref_length + p.x1)};
        case Regime::PlasticPlateau:
            return {p.f1 / (p.ref_length + p.x2), p.f1 / (p.ref_length + p.x1)};
        case Regime::Softening:
            return {0.0, p.f1 / (p.ref_length + p.x2)};
        case Regime::Failed:
            return {0.0, 0.0};
    }
    return {0.0, 0.0};
}

enum class KtildeMode : std::uint8_t {
    // Interval midpoint (lower+upper)/2 of the secant bounds. Default.
    Midpoint = 0,
    // Fixed closed-form coefficients. They coincide with the midpoint on
    // both elastic branches, but give the interval half-width on the
    // plateau and a |b|-dependent expression (negative for x3 < |b|) on
    // the softening branch.
    PaperLiteral = 1,
};

inline KtildeMode ktilde_mode_from_string(const std::string& s) {
    if (s == "midpoint") return KtildeMode::Midpoint;
    if (s == "paper-literal") return KtildeMode::PaperLiteral;
    throw std::invalid_argument("unknown linearization mode '" + s + "' (use midpoint or paper-literal)");
}

inline const char* to_string(KtildeMode m) {
    return m == KtildeMode::Midpoint ? "midpoint" : "paper-literal";
}

// One diagonal entry of the linearized stiffness, with the bounds it was
// taken from. `value` is floored in magnitude at epsilon (sign preserved,
// +epsilon for a failed bond) so assembled systems stay nonsingular.
struct StiffnessEntry {
    Regime regime = Regime::TensileElastic;
    double lower = 0.0;
    double upper = 0.0;
    double value = 0.0;
    double epsilon = 0.0;
};

inline StiffnessEntry ktilde_entry(Regime regime, const BondParams& p, KtildeMode mode,
                                   double epsilon) {
    if (!(epsilon >= 0.0))
        throw std::invalid_argument("ktilde_entry: epsilon must be nonnegative");
    const SecantBounds bounds = secant_ratio_bounds(regime, p);
    double value = 0.0;
    if (mode == KtildeMode::Midpoint) {
        value = 0.5 * (bounds.lower + bounds.upper);
    } else {
        const double b = p.ref_length;
        switch (regime) {
            case Regime::CompressiveElastic:
                value = (p.f0 / (2.0 * p.x0)) * (1.0 - b / (b + p.x0));
                break;
            case Regime::TensileElastic:
                value = (p.f1 / (2.0 * p.x1)) * (1.0 - b / (b + p.x1));
                break;
            case Regime::PlasticPlateau:
                value = p.f1 * (p.x2 - p.x1) / (2.0 * (b + p.x1) * (b + p.x2));
                break;
            case Regime::Softening:
                value = p.f1 * (p.x3 - b) / (2.0 * (p.x3 + b) * (p.x2 + b));
                break;
            case Regime::Failed:
                value = 0.0;
                break;
        }
    }
    if (std::abs(value) < epsilon)
        value = std::copysign(epsilon, value == 0.0 ? 1.0 : value);
    return {regime, bounds.lower, bounds.upper, value, epsilon};
}

}  // namespace latmech
