// Batch runner: fbdsde <command> [--config file] [--seed n] [--out dir] [--quiet]
// Exit status: 0 all checks pass, 1 a check failed, 2 usage or configuration error.

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using Command = std::function<void(fbdsde::cli::Context&)>;

const std::map<std::string, std::pair<Command, const char*>>& commands() {
    using namespace fbdsde::cli;
    static const std::map<std::string, std::pair<Command, const char*>> table = {
        {"ito-check", {ito_check, "discrete Ito formula residuals"}},
        {"assumptions", {assumptions, "derivative, monotonicity and Lipschitz probes"}},
        {"solve", {solve, "lattice solution of a linear system"}},
        {"verify-degenerate", {verify_degenerate, "zero optimum and Hamiltonian gap of the degenerate example"}},
        {"spike-orders", {spike_orders, "order-of-epsilon slopes of the spike variation"}},
        {"adjoint-check", {adjoint_check, "duality identity for every adjoint sign convention"}},
        {"smp-check", {smp_check, "pointwise Hamiltonian gap along the solved optimum"}},
        {"game-nash", {game_nash, "Nash inequalities of the two-player game"}},
        {"spde-grid", {spde_grid, "u(t, x) by Monte Carlo against finite differences"}},
        {"tree-vs-mc", {tree_vs_mc, "regression Monte Carlo against the lattice"}},
    };
    return table;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Doubly stochastic forward-backward systems: solvers and checks"};
    app.require_subcommand(1, 1);
    std::string config_path, out_dir;
    std::int64_t seed = -1;
    bool quiet = false;
    app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "overrides the config seed");
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_flag("--quiet", quiet, "print nothing on success");
    app.fallthrough();  // options may follow the command name
    for (const auto& [name, entry] : commands()) app.add_subcommand(name, entry.second);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    const std::string name = app.get_subcommands().front()->get_name();

    fbdsde::cli::Context ctx;
    try {
        ctx.cfg = config_path.empty() ? fbdsde::parse_experiment(fbdsde::Json::object()) : fbdsde::load_experiment(config_path);
        if (seed >= 0) ctx.cfg.seed = ctx.cfg.solver.seed = static_cast<std::uint64_t>(seed);
        ctx.out = out_dir.empty() ? ctx.cfg.out : out_dir;
        std::filesystem::create_directories(ctx.out);
        ctx.summary.command = name;
        ctx.summary.provenance = ctx.cfg.provenance();
        commands().at(name).first(ctx);
    } catch (const fbdsde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const fbdsde::ModelError& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return 2;
    } catch (const fbdsde::DomainError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const fbdsde::BudgetError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        // solver failures are check failures
        ctx.summary.add("run completed", 0.0, 0.0, false, e.what());
    }

    try {
        ctx.summary.write(ctx.out / "summary.json");
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
    const bool ok = ctx.summary.pass();
    if (!quiet || !ok) {
        for (const auto& c : ctx.summary.checks)
            std::printf("%s  %-55s value %-24s threshold %s%s%s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                        fbdsde::format_double(c.value).c_str(), fbdsde::format_double(c.threshold).c_str(),
                        c.note.empty() ? "" : "  ", c.note.c_str());
        std::printf("%s: %s (summary in %s)\n", name.c_str(), ok ? "pass" : "FAIL", (ctx.out / "summary.json").c_str());
    }
    return ok ? 0 : 1;
}
