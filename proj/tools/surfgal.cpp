#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "surfgal/bench.hpp"

using namespace surfgal;

namespace {

// Values given on the command line or in the config file; unset ones keep the
// subcommand defaults.
struct Overrides {
    std::optional<std::string> surface, scheme, energy, init, sweep, nodes, mesh, weights, out;
    std::optional<std::size_t> nx, ny, k2;
    std::optional<int> m, degree;
    std::optional<double> eps, dt, T, width, stabilization, tol;
    std::optional<std::uint64_t> seed;
    std::vector<std::size_t> nx_list, ny_list, k2_list;
    std::vector<double> dt_list, snapshots;
    bool full_basis = false;

    void apply(ExperimentConfig& c) const {
        auto set = [](auto& dst, const auto& src) {
            if (src) dst = *src;
        };
        set(c.surface, surface), set(c.scheme, scheme), set(c.energy, energy), set(c.init, init), set(c.sweep, sweep);
        if (nodes) c.nodes_file = *nodes;
        if (mesh) c.mesh_file = *mesh;
        if (weights) c.weights_file = *weights;
        if (out) c.out = *out;
        set(c.nx, nx), set(c.ny, ny), set(c.k2, k2), set(c.m, m), set(c.degree, degree);
        set(c.eps, eps), set(c.dt, dt), set(c.T, T), set(c.width, width), set(c.stabilization, stabilization), set(c.tol, tol);
        set(c.seed, seed);
        if (!nx_list.empty()) c.nx_list = nx_list;
        if (!ny_list.empty()) c.ny_list = ny_list;
        if (!k2_list.empty()) c.k2_list = k2_list;
        if (!dt_list.empty()) c.dt_list = dt_list;
        if (!snapshots.empty()) c.snapshots = snapshots;
        if (full_basis) c.full_basis = true;
        if (c.sweep == "dt" && !T) c.T = 1.0;
    }
};

void print(const Report& r) {
    for (const auto& c : r.checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << r.experiment << '.' << c.name << " value=" << c.value
                  << " threshold=" << c.threshold << '\n';
    std::cout << r.experiment << (r.passed() ? " passed" : " failed") << " in " << r.seconds << " s; report in "
              << "report.json\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Meshless Galerkin phase-field solver on closed surfaces"};
    app.set_config("--config", "", "Key-value config file (TOML/INI); flags override its values");
    app.require_subcommand(1);
    Overrides o;
    bool full = false;
    app.add_flag("--full", full, "Large reference sizes instead of the desktop defaults");
    app.add_option("--surface", o.surface, "sphere | torus | ellipsoid | cyclide");
    app.add_option("--nx", o.nx, "Number of trial centers");
    app.add_option("--ny", o.ny, "Number of quadrature nodes");
    app.add_option("--nodes", o.nodes, "Trial centers from file")->check(CLI::ExistingFile);
    app.add_option("--mesh", o.mesh, "Quadrature mesh from file")->check(CLI::ExistingFile);
    app.add_option("--weights", o.weights, "Quadrature weights from file")->check(CLI::ExistingFile);
    app.add_option("--m", o.m, "Matern order, 2..6");
    app.add_option("--eps", o.eps, "Kernel shape parameter");
    app.add_option("--k2", o.k2, "Stencil factor K^2");
    app.add_flag("--full-basis", o.full_basis, "Global Lagrange basis instead of local stencils");
    app.add_option("--degree", o.degree, "Quadrature degree (2, 4, 6, 8)");
    app.add_option("--scheme", o.scheme, "avf_ac | avf_ch | cn_ac");
    app.add_option("--dt", o.dt, "Time step");
    app.add_option("--T", o.T, "Final time");
    app.add_option("--energy", o.energy, "scaled | interface");
    app.add_option("--width", o.width, "Interface width");
    app.add_option("--stabilization", o.stabilization, "Picard shift factor");
    app.add_option("--tol", o.tol, "Nonlinear tolerance");
    app.add_option("--init", o.init, "random | circles");
    app.add_option("--seed", o.seed, "Seed for random initial data");
    app.add_option("--snapshots", o.snapshots, "Snapshot times")->delimiter(',');
    app.add_option("--sweep", o.sweep, "nx | ny | dt");
    app.add_option("--nx-list", o.nx_list, "N_X values")->delimiter(',');
    app.add_option("--ny-list", o.ny_list, "N_Y values")->delimiter(',');
    app.add_option("--k2-list", o.k2_list, "Stencil factors")->delimiter(',');
    app.add_option("--dt-list", o.dt_list, "Time steps")->delimiter(',');
    app.add_option("--out", o.out, "Output directory");

    for (const char* name : {"basis", "quad", "solve", "converge", "stencil", "curvature", "separate"})
        app.add_subcommand(name)->fallthrough();

    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        auto cfg = default_config(cmd, full);
        o.apply(cfg);
        Report rep;
        if (cmd == "basis") rep = run_basis_decay(cfg);
        else if (cmd == "quad") rep = run_quadrature(cfg);
        else if (cmd == "solve") rep = run_sourced(cfg);
        else if (cmd == "converge") rep = cfg.sweep == "dt" ? run_temporal_convergence(cfg).first : run_spatial_convergence(cfg).first;
        else if (cmd == "stencil") rep = run_stencil_study(cfg).first;
        else if (cmd == "curvature") rep = run_curvature_flow(cfg);
        else rep = run_phase_separation(cfg);
        rep.data["config"] = to_json(cfg);
        rep.save(cfg.out);
        print(rep);
        return rep.passed() ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
