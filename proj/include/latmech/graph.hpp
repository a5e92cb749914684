#pragma once

// Graph topology of a site-bond lattice and the discrete-calculus operators
// on it: the signed node-edge incidence matrix acts as a gradient taking
// nodal fields to edge fields, its transpose as the divergence going back.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace latmech {

using NodalField = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using EdgeField = Eigen::Matrix<double, Eigen::Dynamic, 3>;

// Row-major so that row i of the operator is edge i; iteration over the
// stored values is then row-by-row and reproducible.
using IncidenceOperator = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Oriented edge: the sign convention is +1 on `first`, -1 on `second`,
// so the edge vector is x(first) - x(second). Orientation is data carried
// by the graph, not a convention derived from node ids.
struct Edge {
    int first = 0;
    int second = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

enum class BondFamily : std::uint8_t { Unspecified = 0, B1 = 1, B2 = 2 };

// Builds the m-by-n incidence matrix: row i holds +1 in column edges[i].first
// and -1 in column edges[i].second, nothing else.
inline IncidenceOperator build_incidence(const std::vector<Edge>& edges, int node_count) {
    if (node_count < 2)
        throw std::invalid_argument("build_incidence: need at least 2 nodes");
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(2 * edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge& e = edges[i];
        if (e.first == e.second)
            throw std::invalid_argument("build_incidence: degenerate edge " + std::to_string(i) +
                                        " connects node " + std::to_string(e.first) + " to itself");
        if (e.first < 0 || e.first >= node_count || e.second < 0 || e.second >= node_count)
            throw std::invalid_argument("build_incidence: edge " + std::to_string(i) +
                                        " references a node id outside [0, " +
                                        std::to_string(node_count) + ")");
        triplets.emplace_back(static_cast<int>(i), e.first, 1.0);
        triplets.emplace_back(static_cast<int>(i), e.second, -1.0);
    }
    IncidenceOperator a(static_cast<int>(edges.size()), node_count);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    return a;
}

// y = A x: per edge, the difference of the endpoint values.
inline EdgeField gradient(const IncidenceOperator& a, const NodalField& x) {
    if (x.rows() != a.cols())
        throw std::invalid_argument("gradient: nodal field has " + std::to_string(x.rows()) +
                                    " rows, expected " + std::to_string(a.cols()));
    return a * x;
}

// b = A^T f: per node, the signed sum of incident edge values. Its column
// sums vanish because every edge contributes +f and -f once.
inline NodalField divergence(const IncidenceOperator& a, const EdgeField& f) {
    if (f.rows() != a.rows())
        throw std::invalid_argument("divergence: edge field has " + std::to_string(f.rows()) +
                                    " rows, expected " + std::to_string(a.rows()));
    return a.transpose() * f;
}

// Immutable site-bond graph: node positions in the reference state plus the
// oriented edges, with the incidence operator and reference edge geometry
// computed once at construction.
class LatticeGraph {
public:
    LatticeGraph(NodalField reference_positions, std::vector<Edge> edges,
                 std::vector<BondFamily> families = {})
        : positions_(std::move(reference_positions)),
          edges_(std::move(edges)),
          families_(std::move(families)) {
        const int n = static_cast<int>(positions_.rows());
        if (n < 2)
            throw std::invalid_argument("LatticeGraph: need at least 2 nodes");
        if (edges_.empty())
            throw std::invalid_argument("LatticeGraph: need at least 1 edge");
        if (!families_.empty() && families_.size() != edges_.size())
            throw std::invalid_argument("LatticeGraph: family tags must match edge count");

        std::set<std::pair<int, int>> seen;
        for (std::size_t i = 0; i < edges_.size(); ++i) {
            const auto [lo, hi] = std::minmax(edges_[i].first, edges_[i].second);
            if (!seen.emplace(lo, hi).second)
                throw std::invalid_argument("LatticeGraph: duplicate undirected edge (" +
                                            std::to_string(lo) + ", " + std::to_string(hi) + ")");
        }

        incidence_ = build_incidence(edges_, n);
        edge_vectors_ = gradient(incidence_, positions_);
        lengths_ = edge_vectors_.rowwise().norm();
        for (Eigen::Index i = 0; i < lengths_.size(); ++i)
            if (!(lengths_[i] > 0.0))
                throw std::invalid_argument("LatticeGraph: edge " + std::to_string(i) +
                                            " has zero reference length");
    }

    int node_count() const { return static_cast<int>(positions_.rows()); }
    int edge_count() const { return static_cast<int>(edges_.size()); }

    const NodalField& reference_positions() const { return positions_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const IncidenceOperator& incidence() const { return incidence_; }

    // b = A * reference_positions, evaluated once.
    const EdgeField& reference_edge_vectors() const { return edge_vectors_; }
    const Eigen::VectorXd& reference_lengths() const { return lengths_; }

    // Empty when the graph was not generated with bond families.
    const std::vector<BondFamily>& families() const { return families_; }

private:
    NodalField positions_;
    std::vector<Edge> edges_;
    std::vector<BondFamily> families_;
    IncidenceOperator incidence_;
    EdgeField edge_vectors_;
    Eigen::VectorXd lengths_;
};

}  // namespace latmech
