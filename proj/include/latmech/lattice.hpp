#pragma once

// Regular site-bond lattice on the truncated-octahedron tessellation: sites
// at cell centres form two interpenetrating cubic sublattices (cell corners
// and body centres), bonds connect each body centre to its 8 corners (family
// B1, length sqrt(3)/2*S) and each site to its 6 axis-aligned same-sublattice
// neighbours (family B2, length S). Interior sites have coordination 14.

#include "latmech/graph.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace latmech {

// Cell counts plus exactly one sizing input. S is the cubic cell size, a the
// quarter-diagonal unit with S = sqrt(8)*a; grain-volume sizing uses
// S = (2*V)^(1/3) and triple-line sizing a = L_TL.
struct LatticeSpec {
    int nx = 1;
    int ny = 1;
    int nz = 1;
    std::optional<double> cell_size;     // S
    std::optional<double> quarter_diag;  // a
    std::optional<double> grain_volume;  // V_GR
    std::optional<double> triple_line;   // L_TL

    double resolve_cell_size() const {
        if (nx < 1 || ny < 1 || nz < 1)
            throw std::invalid_argument("LatticeSpec: cell counts must be >= 1");
        int given = 0;
        for (const auto& v : {cell_size, quarter_diag, grain_volume, triple_line})
            if (v) {
                ++given;
                if (!(*v > 0.0))
                    throw std::invalid_argument("LatticeSpec: size inputs must be positive");
            }
        if (given != 1)
            throw std::invalid_argument("LatticeSpec: exactly one sizing input required");
        if (cell_size) return *cell_size;
        if (quarter_diag) return std::sqrt(8.0) * *quarter_diag;
        if (grain_volume) return std::cbrt(2.0 * *grain_volume);
        return std::sqrt(8.0) * *triple_line;
    }
};

// Open boundaries: boundary sites simply carry fewer bonds. Node numbering
// is lexicographic in (z, y, x) with the corner sublattice first, and each
// bond is oriented with the higher node id first.
inline LatticeGraph build_bcc_lattice(const LatticeSpec& spec) {
    const double s = spec.resolve_cell_size();
    const int nx = spec.nx, ny = spec.ny, nz = spec.nz;

    const int corners_per_row = nx + 1;
    const int corners_per_slab = (nx + 1) * (ny + 1);
    const int corner_count = corners_per_slab * (nz + 1);
    const int centre_count = nx * ny * nz;
    const int n = corner_count + centre_count;

    const auto corner_id = [&](int i, int j, int k) {
        return k * corners_per_slab + j * corners_per_row + i;
    };
    const auto centre_id = [&](int i, int j, int k) {
        return corner_count + (k * ny + j) * nx + i;
    };

    NodalField pos(n, 3);
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i)
                pos.row(corner_id(i, j, k)) << i * s, j * s, k * s;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                pos.row(centre_id(i, j, k)) << (i + 0.5) * s, (j + 0.5) * s, (k + 0.5) * s;

    std::vector<Edge> edges;
    std::vector<BondFamily> families;
    const auto add_bond = [&](int u, int v, BondFamily family) {
        edges.push_back({std::max(u, v), std::min(u, v)});
        families.push_back(family);
    };

    // B1: body centre to its eight cell corners.
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                for (int dk = 0; dk <= 1; ++dk)
                    for (int dj = 0; dj <= 1; ++dj)
                        for (int di = 0; di <= 1; ++di)
                            add_bond(centre_id(i, j, k), corner_id(i + di, j + dj, k + dk),
                                     BondFamily::B1);

    // B2: axis-aligned neighbours within each sublattice.
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                if (i < nx) add_bond(corner_id(i, j, k), corner_id(i + 1, j, k), BondFamily::B2);
                if (j < ny) add_bond(corner_id(i, j, k), corner_id(i, j + 1, k), BondFamily::B2);
                if (k < nz) add_bond(corner_id(i, j, k), corner_id(i, j, k + 1), BondFamily::B2);
            }
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                if (i + 1 < nx) add_bond(centre_id(i, j, k), centre_id(i + 1, j, k), BondFamily::B2);
                if (j + 1 < ny) add_bond(centre_id(i, j, k), centre_id(i, j + 1, k), BondFamily::B2);
                if (k + 1 < nz) add_bond(centre_id(i, j, k), centre_id(i, j, k + 1), BondFamily::B2);
            }

    // Canonical edge order: ascending (lower id, higher id).
    std::vector<std::size_t> order(edges.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ka = std::minmax(edges[a].first, edges[a].second);
        const auto kb = std::minmax(edges[b].first, edges[b].second);
        return ka < kb;
    });
    std::vector<Edge> sorted_edges(edges.size());
    std::vector<BondFamily> sorted_families(edges.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        sorted_edges[i] = edges[order[i]];
        sorted_families[i] = families[order[i]];
    }

    return LatticeGraph(std::move(pos), std::move(sorted_edges), std::move(sorted_families));
}

// Closed-form bond totals for an nx*ny*nz lattice, by family.
struct LatticeBondCounts {
    long b1 = 0;
    long b2 = 0;
};

inline LatticeBondCounts expected_bond_counts(int nx, int ny, int nz) {
    LatticeBondCounts c;
    c.b1 = 8L * nx * ny * nz;
    c.b2 = static_cast<long>(nx) * (ny + 1) * (nz + 1) + static_cast<long>(nx + 1) * ny * (nz + 1) +
           static_cast<long>(nx + 1) * (ny + 1) * nz + static_cast<long>(nx - 1) * ny * nz +
           static_cast<long>(nx) * (ny - 1) * nz + static_cast<long>(nx) * ny * (nz - 1);
    return c;
}

}  // namespace latmech
