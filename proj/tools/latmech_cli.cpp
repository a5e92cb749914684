// Command-line front end: generate site-bond lattices, run displacement-
// controlled solves, and cross-check the sparse engine against the dense
// reference path.
//
// Exit codes: 0 success / converged, 1 input error, 2 flagged result
// (non-converged solve, or verification mismatch).

#include "latmech/driver.hpp"
#include "latmech/io.hpp"
#include "latmech/lattice.hpp"
#include "latmech/oracle.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <random>
#include <string>

namespace {

struct GenerateArgs {
    std::string cells = "1,1,1";
    std::optional<double> size_a;
    std::optional<double> size_s;
    std::optional<double> grain_volume;
    std::string out;
};

struct SolveArgs {
    std::string mesh;
    std::string bc;
    int steps = 1;
    std::string mode = "midpoint";
    std::optional<double> epsilon;
    double theta = 1e-8;
    std::optional<double> tol;
    int max_iters = 50;
    bool dump_plot_data = false;
    std::string out;
};

struct VerifyArgs {
    std::string mesh;
    std::string bc;
    std::optional<unsigned> seed;
};

latmech::LatticeSpec parse_spec(const GenerateArgs& args) {
    latmech::LatticeSpec spec;
    if (std::sscanf(args.cells.c_str(), "%d,%d,%d", &spec.nx, &spec.ny, &spec.nz) != 3)
        throw std::runtime_error("--cells expects nx,ny,nz");
    spec.quarter_diag = args.size_a;
    spec.cell_size = args.size_s;
    spec.grain_volume = args.grain_volume;
    return spec;
}

int run_generate(const GenerateArgs& args) {
    const latmech::LatticeSpec spec = parse_spec(args);
    const latmech::LatticeGraph graph = latmech::build_bcc_lattice(spec);

    // Uniform demo bond law scaled to the shorter bond family: elastic to 5%
    // of L1, plateau to 15%, failure at 25%.
    const double l1 = graph.reference_lengths().minCoeff();
    latmech::BondParams defaults;
    defaults.x0 = -0.05 * l1;
    defaults.x1 = 0.05 * l1;
    defaults.x2 = 0.15 * l1;
    defaults.x3 = 0.25 * l1;
    defaults.f0 = -1.0;
    defaults.f1 = 1.0;

    latmech::write_mesh_file(args.out, latmech::mesh_from_lattice(graph, defaults));
    std::cout << "wrote " << args.out << ": " << graph.node_count() << " nodes, "
              << graph.edge_count() << " edges\n";
    return 0;
}

int run_solve(const SolveArgs& args) {
    const latmech::MeshDocument doc = latmech::read_mesh_file(args.mesh);
    latmech::LoadedProblem problem = latmech::load_graph(doc);
    const latmech::BoundaryDocument bc = latmech::read_boundary_file(args.bc);
    const latmech::DofMask mask = latmech::make_mask(bc, problem.graph.node_count());
    mask.validate();

    latmech::SolveOptions opts;
    opts.load_steps = args.steps;
    opts.mode = latmech::ktilde_mode_from_string(args.mode);
    opts.epsilon = args.epsilon;
    opts.theta = args.theta;
    opts.tol_e = args.tol;
    opts.max_regime_iters = args.max_iters;
    opts.validate();

    const latmech::SolveResult result =
        latmech::solve_nonlinear(problem.graph, problem.params, mask, opts);
    latmech::write_result_bundle(args.out, problem.graph, problem.params, mask, opts, result,
                                 args.dump_plot_data);

    const auto& dm = result.damage;
    std::cout << "steps: " << result.steps.size() << ", converged: " << (result.converged ? "yes" : "no")
              << ", failed edges: " << dm.failed_edges.size()
              << ", stiffness ratio: " << dm.stiffness_ratio << "\n";
    std::cout << "results written to " << args.out << "\n";
    if (!result.converged) {
        std::cout << "warning: fixed point did not converge within " << args.max_iters
                  << " iterations on at least one step\n";
        return 2;
    }
    return 0;
}

int report_check(const std::string& label, const latmech::oracle::VerifyReport& rep) {
    std::cout << label << ": X_p max rel " << rep.max_rel_solution << ", B_q max rel "
              << rep.max_rel_reaction << ", equilibrium residual " << rep.max_residual << " -> "
              << (rep.pass() ? "ok" : "MISMATCH") << "\n";
    return rep.pass() ? 0 : 2;
}

int run_verify(const VerifyArgs& args) {
    int status = 0;
    bool ran_any = false;

    if (!args.mesh.empty()) {
        const latmech::MeshDocument doc = latmech::read_mesh_file(args.mesh);
        latmech::LoadedProblem problem = latmech::load_graph(doc);
        const latmech::BoundaryDocument bc = latmech::read_boundary_file(args.bc);
        const latmech::DofMask mask = latmech::make_mask(bc, problem.graph.node_count());
        mask.validate();

        latmech::SolveOptions opts;
        const double eps = opts.resolve_epsilon(problem.params);

        Eigen::VectorXd pristine(problem.graph.edge_count());
        for (int i = 0; i < problem.graph.edge_count(); ++i)
            pristine[i] = latmech::ktilde_entry(latmech::Regime::TensileElastic, problem.params[i],
                                                opts.mode, eps)
                              .value;
        status |= report_check("mesh (pristine stiffness)",
                               latmech::oracle::verify_linear_system(problem.graph, pristine, mask));

        const latmech::SolveResult result =
            latmech::solve_nonlinear(problem.graph, problem.params, mask, opts);
        status |= report_check(
            "mesh (converged stiffness)",
            latmech::oracle::verify_linear_system(problem.graph, result.final_state().ktilde, mask));
        ran_any = true;
    }

    if (args.seed) {
        std::mt19937 rng(*args.seed);
        const latmech::LatticeGraph graph = latmech::oracle::random_graph(rng, 30, 20);
        const auto params = latmech::oracle::random_params(rng, graph);
        latmech::SolveOptions opts;
        const double eps = opts.resolve_epsilon(params);

        Eigen::VectorXd kdiag(graph.edge_count());
        for (int i = 0; i < graph.edge_count(); ++i) {
            std::uniform_real_distribution<double> span(0.9 * params[i].x0, 1.1 * params[i].x3);
            const auto regime = latmech::classify_regime(span(rng), params[i]).regime;
            kdiag[i] = latmech::ktilde_entry(regime, params[i], latmech::KtildeMode::Midpoint, eps).value;
        }
        const latmech::DofMask mask = latmech::oracle::random_mask(rng, graph.node_count());
        status |= report_check("random graph (seed " + std::to_string(*args.seed) + ")",
                               latmech::oracle::verify_linear_system(graph, kdiag, mask));
        ran_any = true;
    }

    if (!ran_any) throw std::runtime_error("verify: give --mesh/--bc, --seed, or both");
    return status == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("LATMECH_THREADS"))
        Eigen::setNbThreads(std::max(1, std::atoi(threads)));

    CLI::App app{"latmech: lattice mechanics with elastic, plastic and failing bonds"};
    app.require_subcommand(1);

    GenerateArgs gen;
    CLI::App* generate = app.add_subcommand("generate", "generate a site-bond lattice mesh");
    generate->add_option("--cells", gen.cells, "cell counts nx,ny,nz")->required();
    auto* opt_a = generate->add_option("--size-a", gen.size_a, "quarter-diagonal unit a");
    auto* opt_s = generate->add_option("--size-S", gen.size_s, "cubic cell size S");
    auto* opt_v = generate->add_option("--grain-volume", gen.grain_volume, "average grain volume");
    opt_a->excludes(opt_s)->excludes(opt_v);
    opt_s->excludes(opt_v);
    generate->add_option("--out", gen.out, "output mesh path")->required();

    SolveArgs sol;
    CLI::App* solve = app.add_subcommand("solve", "run a displacement-controlled solve");
    solve->add_option("--mesh", sol.mesh, "mesh document")->required();
    solve->add_option("--bc", sol.bc, "boundary document")->required();
    solve->add_option("--steps", sol.steps, "number of load steps");
    solve->add_option("--mode", sol.mode, "linearization mode: midpoint or paper-literal");
    solve->add_option("--epsilon", sol.epsilon, "stiffness floor");
    solve->add_option("--theta", sol.theta, "regularizer norm for the fallback route");
    solve->add_option("--tol", sol.tol, "elongation convergence tolerance");
    solve->add_option("--max-iters", sol.max_iters, "regime iterations per step");
    solve->add_flag("--dump-plot-data", sol.dump_plot_data, "also write per-step steps.csv");
    solve->add_option("--out", sol.out, "output directory")->required();

    VerifyArgs ver;
    CLI::App* verify = app.add_subcommand("verify", "compare sparse engine against dense reference");
    auto* vmesh = verify->add_option("--mesh", ver.mesh, "mesh document");
    verify->add_option("--bc", ver.bc, "boundary document")->needs(vmesh);
    vmesh->needs(verify->get_option("--bc"));
    verify->add_option("--seed", ver.seed, "also verify a seeded random 30-node graph");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (generate->parsed()) return run_generate(gen);
        if (solve->parsed()) return run_solve(sol);
        return run_verify(ver);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
