#pragma once

// File formats: the JSON mesh document (nodes, edges, bond parameters), the
// JSON boundary document (per node, per axis prescriptions), and the result
// bundle written after a solve (nodes.csv, edges.csv, run.json, optionally
// steps.csv). Writes go through a temp file plus rename.

#include "latmech/constitutive.hpp"
#include "latmech/driver.hpp"
#include "latmech/graph.hpp"
#include "latmech/linear_system.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace latmech {

using json = nlohmann::json;

inline constexpr int kMeshFormatVersion = 1;
inline constexpr int kBoundaryFormatVersion = 1;

// 17 significant digits: enough to reproduce any double exactly on reload.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Mesh document

struct MeshDocument {
    NodalField nodes;
    std::vector<Edge> edges;
    std::optional<BondParams> uniform_params;   // single record applied to all
    std::vector<BondParams> per_edge_params;    // or one record per edge
    std::vector<BondFamily> families;           // optional
    Eigen::VectorXd stated_lengths;             // optional, checked on load
};

namespace detail {

inline json params_to_json(const BondParams& p) {
    return json{{"x0", p.x0}, {"x1", p.x1}, {"x2", p.x2},
                {"x3", p.x3}, {"f0", p.f0}, {"f1", p.f1}};
}

inline BondParams params_from_json(const json& j) {
    BondParams p;
    p.x0 = j.at("x0").get<double>();
    p.x1 = j.at("x1").get<double>();
    p.x2 = j.at("x2").get<double>();
    p.x3 = j.at("x3").get<double>();
    p.f0 = j.at("f0").get<double>();
    p.f1 = j.at("f1").get<double>();
    return p;
}

inline const char* family_name(BondFamily f) {
    switch (f) {
        case BondFamily::B1: return "B1";
        case BondFamily::B2: return "B2";
        default: return "unspecified";
    }
}

inline BondFamily family_from_name(const std::string& s) {
    if (s == "B1") return BondFamily::B1;
    if (s == "B2") return BondFamily::B2;
    if (s == "unspecified") return BondFamily::Unspecified;
    throw std::runtime_error("mesh: unknown bond family '" + s + "'");
}

}  // namespace detail

inline json mesh_to_json(const MeshDocument& doc) {
    json j;
    j["format_version"] = kMeshFormatVersion;
    json nodes = json::array();
    for (Eigen::Index r = 0; r < doc.nodes.rows(); ++r)
        nodes.push_back({doc.nodes(r, 0), doc.nodes(r, 1), doc.nodes(r, 2)});
    j["nodes"] = std::move(nodes);
    json edges = json::array();
    for (const Edge& e : doc.edges) edges.push_back({e.first, e.second});
    j["edges"] = std::move(edges);
    if (doc.uniform_params)
        j["bond_params"] = detail::params_to_json(*doc.uniform_params);
    else {
        json arr = json::array();
        for (const BondParams& p : doc.per_edge_params) arr.push_back(detail::params_to_json(p));
        j["bond_params"] = std::move(arr);
    }
    if (!doc.families.empty()) {
        json fams = json::array();
        for (BondFamily f : doc.families) fams.push_back(detail::family_name(f));
        j["families"] = std::move(fams);
    }
    if (doc.stated_lengths.size() > 0) {
        json lens = json::array();
        for (Eigen::Index i = 0; i < doc.stated_lengths.size(); ++i)
            lens.push_back(doc.stated_lengths[i]);
        j["lengths"] = std::move(lens);
    }
    return j;
}

inline MeshDocument mesh_from_json(const json& j) {
    if (!j.is_object()) throw std::runtime_error("mesh: document must be a JSON object");
    if (j.at("format_version").get<int>() != kMeshFormatVersion)
        throw std::runtime_error("mesh: unsupported format_version");
    MeshDocument doc;
    const json& nodes = j.at("nodes");
    if (!nodes.is_array() || nodes.size() < 2)
        throw std::runtime_error("mesh: need at least 2 nodes");
    doc.nodes.resize(static_cast<Eigen::Index>(nodes.size()), 3);
    for (std::size_t r = 0; r < nodes.size(); ++r) {
        const json& row = nodes[r];
        if (!row.is_array() || row.size() != 3)
            throw std::runtime_error("mesh: node " + std::to_string(r) + " is not an [x,y,z] triple");
        for (int c = 0; c < 3; ++c) doc.nodes(static_cast<Eigen::Index>(r), c) = row[c].get<double>();
    }
    const json& edges = j.at("edges");
    if (!edges.is_array() || edges.empty())
        throw std::runtime_error("mesh: need at least 1 edge");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const json& row = edges[i];
        if (!row.is_array() || row.size() != 2)
            throw std::runtime_error("mesh: edge " + std::to_string(i) + " is not a [first,second] pair");
        doc.edges.push_back({row[0].get<int>(), row[1].get<int>()});
    }
    const json& bp = j.at("bond_params");
    if (bp.is_object())
        doc.uniform_params = detail::params_from_json(bp);
    else if (bp.is_array()) {
        if (bp.size() != doc.edges.size())
            throw std::runtime_error("mesh: bond_params array must match edge count");
        for (const json& rec : bp) doc.per_edge_params.push_back(detail::params_from_json(rec));
    } else {
        throw std::runtime_error("mesh: bond_params must be an object or an array");
    }
    if (j.contains("families")) {
        const json& fams = j.at("families");
        if (fams.size() != doc.edges.size())
            throw std::runtime_error("mesh: families array must match edge count");
        for (const json& f : fams) doc.families.push_back(detail::family_from_name(f.get<std::string>()));
    }
    if (j.contains("lengths")) {
        const json& lens = j.at("lengths");
        if (lens.size() != doc.edges.size())
            throw std::runtime_error("mesh: lengths array must match edge count");
        doc.stated_lengths.resize(static_cast<Eigen::Index>(lens.size()));
        for (std::size_t i = 0; i < lens.size(); ++i)
            doc.stated_lengths[static_cast<Eigen::Index>(i)] = lens[i].get<double>();
    }
    return doc;
}

struct LoadedProblem {
    LatticeGraph graph;
    std::vector<BondParams> params;
};

// Validates the document into a graph plus per-edge parameters. Reference
// lengths are recomputed from the node positions; lengths stated in the
// document must agree to 1e-9 relative.
inline LoadedProblem load_graph(const MeshDocument& doc) {
    LatticeGraph graph(doc.nodes, doc.edges, doc.families);
    if (doc.stated_lengths.size() > 0) {
        for (Eigen::Index i = 0; i < doc.stated_lengths.size(); ++i) {
            const double stated = doc.stated_lengths[i];
            const double computed = graph.reference_lengths()[i];
            if (std::abs(computed - stated) > 1e-9 * std::abs(stated))
                throw std::runtime_error("mesh: stated length of edge " + std::to_string(i) + " (" +
                                         fmt17(stated) + ") disagrees with computed " +
                                         fmt17(computed));
        }
    }
    std::vector<BondParams> params;
    params.reserve(graph.edge_count());
    for (int i = 0; i < graph.edge_count(); ++i) {
        BondParams p = doc.uniform_params ? *doc.uniform_params : doc.per_edge_params[i];
        p.ref_length = graph.reference_lengths()[i];
        p.validate();
        params.push_back(p);
    }
    return {std::move(graph), std::move(params)};
}

inline MeshDocument mesh_from_lattice(const LatticeGraph& g, const BondParams& defaults) {
    MeshDocument doc;
    doc.nodes = g.reference_positions();
    doc.edges = g.edges();
    doc.families = g.families();
    doc.uniform_params = defaults;
    return doc;
}

inline MeshDocument read_mesh_file(const std::filesystem::path& path) {
    return mesh_from_json(json::parse(read_text_file(path)));
}

inline void write_mesh_file(const std::filesystem::path& path, const MeshDocument& doc) {
    atomic_write_file(path, mesh_to_json(doc).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Boundary document

struct BoundaryCondition {
    int node = 0;
    int axis = 0;  // 0,1,2 for x,y,z
    DofMask::Kind kind = DofMask::Kind::Force;
    double value = 0.0;
};

struct BoundaryDocument {
    std::vector<BoundaryCondition> conditions;
};

namespace detail {

inline int axis_from_name(const std::string& s) {
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z") return 2;
    throw std::runtime_error("boundary: axis must be x, y or z, got '" + s + "'");
}

inline const char* axis_name(int axis) { return axis == 0 ? "x" : axis == 1 ? "y" : "z"; }

}  // namespace detail

inline json boundary_to_json(const BoundaryDocument& doc) {
    json conditions = json::array();
    for (const BoundaryCondition& c : doc.conditions)
        conditions.push_back({{"node", c.node},
                              {"axis", detail::axis_name(c.axis)},
                              {"kind", c.kind == DofMask::Kind::Displacement ? "disp" : "force"},
                              {"value", c.value}});
    return json{{"format_version", kBoundaryFormatVersion}, {"conditions", std::move(conditions)}};
}

inline BoundaryDocument boundary_from_json(const json& j) {
    if (j.at("format_version").get<int>() != kBoundaryFormatVersion)
        throw std::runtime_error("boundary: unsupported format_version");
    BoundaryDocument doc;
    for (const json& rec : j.at("conditions")) {
        BoundaryCondition c;
        c.node = rec.at("node").get<int>();
        c.axis = detail::axis_from_name(rec.at("axis").get<std::string>());
        const std::string kind = rec.at("kind").get<std::string>();
        if (kind == "disp")
            c.kind = DofMask::Kind::Displacement;
        else if (kind == "force")
            c.kind = DofMask::Kind::Force;
        else
            throw std::runtime_error("boundary: kind must be disp or force, got '" + kind + "'");
        c.value = rec.at("value").get<double>();
        doc.conditions.push_back(c);
    }
    return doc;
}

inline BoundaryDocument read_boundary_file(const std::filesystem::path& path) {
    return boundary_from_json(json::parse(read_text_file(path)));
}

inline void write_boundary_file(const std::filesystem::path& path, const BoundaryDocument& doc) {
    atomic_write_file(path, boundary_to_json(doc).dump(2) + "\n");
}

// Unlisted (node, axis) pairs default to zero applied force. Listing a pair
// twice violates the exclusion principle and is rejected by name.
inline DofMask make_mask(const BoundaryDocument& doc, int node_count) {
    DofMask mask(node_count);
    std::set<std::pair<int, int>> seen;
    for (const BoundaryCondition& c : doc.conditions) {
        if (c.node < 0 || c.node >= node_count)
            throw std::runtime_error("boundary: node " + std::to_string(c.node) + " out of range");
        if (!seen.emplace(c.node, c.axis).second)
            throw std::runtime_error("boundary: (node " + std::to_string(c.node) + ", axis " +
                                     detail::axis_name(c.axis) +
                                     ") prescribed twice; exactly one of displacement or force "
                                     "is allowed per dof");
        if (c.kind == DofMask::Kind::Displacement)
            mask.prescribe_displacement(c.node, c.axis, c.value);
        else
            mask.set_force(c.node, c.axis, c.value);
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Result bundle

namespace detail {

inline json options_to_json(const SolveOptions& opts, const LatticeGraph& g,
                            const std::vector<BondParams>& params) {
    return json{{"max_regime_iters", opts.max_regime_iters},
                {"tol_e", opts.resolve_tol_e(g)},
                {"tol_r", opts.tol_r},
                {"mode", to_string(opts.mode)},
                {"epsilon", opts.resolve_epsilon(params)},
                {"theta", opts.theta},
                {"load_steps", opts.load_steps},
                {"irreversible_damage", opts.irreversible_damage}};
}

}  // namespace detail

inline json run_report_json(const LatticeGraph& g, const std::vector<BondParams>& params,
                            const SolveOptions& opts, const SolveResult& result) {
    json steps = json::array();
    for (const StepLog& log : result.log) {
        steps.push_back({{"step", log.step},
                         {"fraction", log.fraction},
                         {"iterations", log.iterations},
                         {"converged", log.converged},
                         {"max_delta_e", log.max_delta_e},
                         {"regime_changes", log.regime_changes},
                         {"residual", {log.residual[0], log.residual[1], log.residual[2]}},
                         {"regularized", {log.regularized[0], log.regularized[1], log.regularized[2]}},
                         {"pinned_edges", log.pinned_edges},
                         {"out_of_range", log.out_of_range_count}});
    }
    const DamageMetrics& dm = result.damage;
    json damage{{"counts",
                 {{"compressive_elastic", dm.regime_counts[0]},
                  {"tensile_elastic", dm.regime_counts[1]},
                  {"plastic_plateau", dm.regime_counts[2]},
                  {"softening", dm.regime_counts[3]},
                  {"failed", dm.regime_counts[4]}}},
                {"stiffness_ratio", dm.stiffness_ratio},
                {"failed_edges", dm.failed_edges}};
    return json{{"nodes", g.node_count()},
                {"edges", g.edge_count()},
                {"options", detail::options_to_json(opts, g, params)},
                {"converged", result.converged},
                {"used_regularized", result.used_regularized},
                {"steps", std::move(steps)},
                {"damage", std::move(damage)}};
}

inline std::string nodes_csv(const LatticeGraph& g, const DofMask& mask, const StepState& state) {
    std::ostringstream out;
    out << "id,x0,y0,z0,ux,uy,uz,fx,fy,fz,kind_x,kind_y,kind_z\n";
    for (int j = 0; j < g.node_count(); ++j) {
        out << j;
        for (int c = 0; c < 3; ++c) out << ',' << fmt17(g.reference_positions()(j, c));
        for (int c = 0; c < 3; ++c) out << ',' << fmt17(state.displacements(j, c));
        for (int c = 0; c < 3; ++c) out << ',' << fmt17(state.nodal_forces(j, c));
        for (int c = 0; c < 3; ++c)
            out << ',' << (mask.kind[j][c] == DofMask::Kind::Displacement ? "disp" : "force");
        out << '\n';
    }
    return out.str();
}

inline std::string edges_csv(const LatticeGraph& g, const std::vector<BondParams>& params,
                             const SolveResult& result) {
    // First step (1-based) at which each edge appears in the failed set.
    std::vector<int> failed_step(g.edge_count(), -1);
    for (std::size_t s = 0; s < result.steps.size(); ++s)
        for (int id : result.steps[s].failed_edges)
            if (failed_step[id] < 0) failed_step[id] = static_cast<int>(s) + 1;

    const StepState& state = result.final_state();
    std::ostringstream out;
    out << "id,first,second,elongation,axial_force,regime,failed_step\n";
    for (int i = 0; i < g.edge_count(); ++i) {
        out << i << ',' << g.edges()[i].first << ',' << g.edges()[i].second << ','
            << fmt17(state.elongations[i]) << ',' << fmt17(axial_force(state.elongations[i], params[i]))
            << ',' << to_string(state.regimes[i]) << ',' << failed_step[i] << '\n';
    }
    return out.str();
}

inline std::string steps_csv(const LatticeGraph& g, const std::vector<BondParams>& params,
                             const DofMask& mask, const SolveOptions& opts,
                             const SolveResult& result) {
    const double eps = opts.resolve_epsilon(params);
    std::ostringstream out;
    out << "step,fraction,iterations,converged,stiffness_ratio,"
           "n_compressive,n_tensile,n_plateau,n_softening,n_failed,"
           "reaction_x,reaction_y,reaction_z\n";
    for (std::size_t s = 0; s < result.steps.size(); ++s) {
        const StepState& st = result.steps[s];
        const StepLog& log = result.log[s];
        const DamageMetrics dm = damage_metrics(st, params, opts.mode, eps);
        // Reaction on the driven dofs (nonzero prescribed displacement); the
        // sum over all prescribed dofs would vanish by global balance.
        Eigen::RowVector3d reaction = Eigen::RowVector3d::Zero();
        for (int j = 0; j < g.node_count(); ++j)
            for (int ax = 0; ax < 3; ++ax)
                if (mask.kind[j][ax] == DofMask::Kind::Displacement && mask.value(j, ax) != 0.0)
                    reaction[ax] += st.nodal_forces(j, ax);
        out << log.step << ',' << fmt17(log.fraction) << ',' << log.iterations << ','
            << (log.converged ? 1 : 0) << ',' << fmt17(dm.stiffness_ratio);
        for (int r = 0; r < 5; ++r) out << ',' << dm.regime_counts[r];
        for (int ax = 0; ax < 3; ++ax) out << ',' << fmt17(reaction[ax]);
        out << '\n';
    }
    return out.str();
}

// Writes nodes.csv, edges.csv and run.json (plus steps.csv when requested)
// into `dir`, creating it if needed.
inline void write_result_bundle(const std::filesystem::path& dir, const LatticeGraph& g,
                                const std::vector<BondParams>& params, const DofMask& mask,
                                const SolveOptions& opts, const SolveResult& result,
                                bool dump_steps = false) {
    std::filesystem::create_directories(dir);
    atomic_write_file(dir / "nodes.csv", nodes_csv(g, mask, result.final_state()));
    atomic_write_file(dir / "edges.csv", edges_csv(g, params, result));
    atomic_write_file(dir / "run.json", run_report_json(g, params, opts, result).dump(2) + "\n");
    if (dump_steps) atomic_write_file(dir / "steps.csv", steps_csv(g, params, mask, opts, result));
}

}  // namespace latmech
