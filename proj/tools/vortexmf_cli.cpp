#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "vortexmf/harness.hpp"

using namespace vortexmf;

namespace {

harness::ExperimentConfig make_config(const std::string& config_path, std::uint64_t seed_override,
                                      bool have_seed, const std::string& out_dir, int realizations) {
    harness::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = harness::load_config(config_path);
    else cfg.noise = harness::default_noise_model();
    if (have_seed) cfg.seed = seed_override;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (realizations > 0) cfg.realizations = realizations;
    std::filesystem::create_directories(cfg.out_dir);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    harness::apply_thread_cap();
    CLI::App app{"stochastic point vortex / stochastic Euler laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool have_seed = false;
    int realizations = 0;
    bool quiet = false;
    app.add_option("--config", config_path, "experiment config (JSON)");
    app.add_option("--seed", seed, "seed override")->each([&](const std::string&) { have_seed = true; });
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--realizations", realizations, "realization count override");
    app.add_flag("--quiet", quiet, "suppress per-check output");

    CLI::App* cmd_run = app.add_subcommand("run", "coupled particle/PDE experiment");
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "N sweep with envelope table");
    CLI::App* cmd_ito = app.add_subcommand("ito-check", "Ito-identity residual study");
    CLI::App* cmd_verify = app.add_subcommand("verify", "run a named verification suite");
    std::string suite;
    cmd_verify->add_option("suite", suite, "suite name")->required();
    double fitted_C = 1.0;
    cmd_sweep->add_option("--fitted-c", fitted_C, "calibrated constant for the envelope");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_verify->parsed()) {
            const bool ok = harness::verify(suite, quiet);
            std::printf("%s: %s\n", suite.c_str(), ok ? "PASS" : "FAIL");
            return ok ? 0 : 1;
        }
        harness::ExperimentConfig cfg =
            make_config(config_path, seed, have_seed, out_dir, realizations);
        if (quiet) cfg.quiet = true;

        if (cmd_run->parsed()) {
            for (int N : cfg.N_list) {
                harness::RunRecord rec = harness::run_coupled(cfg, N);
                const std::string base = cfg.out_dir + "/N" + std::to_string(N);
                harness::write_record_json(rec, cfg, base + "_record.json");
                harness::write_energy_csv(rec, base + "_energy.csv");
                if (!cfg.quiet)
                    std::printf("N=%d: %zu report times, excluded %d, %.1fs\n", N,
                                rec.times.size(), rec.excluded, rec.wall_seconds);
            }
            return 0;
        }
        if (cmd_sweep->parsed()) {
            harness::SweepResult res = harness::sweep(cfg, fitted_C);
            harness::write_sweep_csv(res, cfg.out_dir + "/sweep.csv");
            for (const harness::SweepRow& row : res.rows)
                std::printf("N=%5d t=%.3f  E<F>=%.5g  hs=%.5g  envelope=%.5g  admissible=%d\n",
                            row.N, row.t, row.mean_reg_F, row.hs, row.envelope,
                            row.admissible ? 1 : 0);
            return 0;
        }
        if (cmd_ito->parsed()) {
            const int N = cfg.N_list.empty() ? 32 : cfg.N_list.front();
            const harness::ItoResidualReport rep =
                harness::ito_residual_check(cfg, N, {4e-3, 2e-3, 1e-3});
            for (size_t i = 0; i < rep.deltas.size(); ++i)
                std::printf("delta=%.4g  E increment=%.6g  residual=%.6g\n", rep.deltas[i],
                            rep.increments[i], rep.residuals[i]);
            std::printf("rhs(0)=%.6g observed order=%.3f\n", rep.rhs_at_start,
                        rep.observed_order);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
