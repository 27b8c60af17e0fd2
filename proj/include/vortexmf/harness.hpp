#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vortexmf/bounds.hpp"
#include "vortexmf/euler_pde.hpp"
#include "vortexmf/modulated_energy.hpp"
#include "vortexmf/noise.hpp"
#include "vortexmf/vortex_sde.hpp"

// Experiment orchestration: coupled particle/PDE runs over a shared Brownian
// path, ensembles of realizations, N sweeps, the Ito residual study, and the
// named verification suites behind the `verify` subcommand.

namespace vortexmf {
namespace harness {

enum class RunMode { Coupled, ParticlesOnly, PdeOnly, AdditiveNoise, Verify };
enum class InitialSampling { Stratified, Iid };

struct InitialDatum {
    std::string profile = "gaussian";  // gaussian | smoothed-disc | two-blob
    double width = 0.5;
    double radius = 1.0;
    double smoothing = 0.2;
    double separation = 1.5;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::vector<int> N_list{256};
    int grid_n = 128;
    double box_L = 8.0;
    double T = 0.25;
    double dt_max = 2e-3;
    double c_cfl = 0.1;
    NoiseModel noise;
    InitialDatum initial;
    int realizations = 64;
    std::string out_dir = "out";
    int cadence = 10;  // energy report every `cadence` steps
    RunMode mode = RunMode::Coupled;
    InitialSampling sampling = InitialSampling::Stratified;
    double additive_nu = 0.0;
    bool quiet = false;

    /// Hash over the semantically meaningful fields (out_dir and quiet excluded).
    std::string hash() const;
};

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);
NoiseModel default_noise_model();

VorticityGrid build_initial_grid(const ExperimentConfig& cfg);
/// Sample N particles from the grid density (inverse-CDF, stratified or iid),
/// keyed by (seed, realization).
VortexEnsemble sample_initial(const VorticityGrid& grid, int N, InitialSampling mode,
                              std::uint64_t seed, std::uint64_t realization);

struct RealizationSeries {
    std::uint64_t realization = 0;
    std::vector<energy::EnergyReport> reports;
    bool failed = false;
    std::string failure;
};

struct RunRecord {
    std::string config_hash;
    int N = 0;
    std::vector<RealizationSeries> series;
    std::vector<double> times;                 // report times
    std::vector<double> mean_abs_F;            // ensemble mean of |F_avg| per time
    std::vector<double> mean_reg_F;            // ensemble mean of <F_avg>_{ln N/N}
    std::vector<double> stderr_reg_F;          // sample std / sqrt(R_eff)
    int excluded = 0;
    double wall_seconds = 0.0;
};

/// Advance the particle system and the PDE with identical increments per
/// (mode, step) over R realizations; energy reports at the configured cadence.
RunRecord run_coupled(const ExperimentConfig& cfg, int N);

void write_record_json(const RunRecord& rec, const ExperimentConfig& cfg,
                       const std::string& path);
void write_energy_csv(const RunRecord& rec, const std::string& path);

struct SweepRow {
    int N = 0;
    double t = 0.0;
    double mean_reg_F = 0.0;
    double hs = 0.0;
    double envelope = 0.0;
    bool admissible = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<RunRecord> records;
};

SweepResult sweep(const ExperimentConfig& cfg, double fitted_C);
void write_sweep_csv(const SweepResult& s, const std::string& path);

struct ItoResidualReport {
    std::vector<double> deltas;
    std::vector<double> residuals;   // |E increment - delta * rhs(0)|
    std::vector<double> increments;  // E increment per delta
    double rhs_at_start = 0.0;
    double observed_order = 0.0;  // log2 slope of residual vs delta
};

/// Weak residual of the Ito identity for <F>_eps: ensemble increment of the
/// regularized energy against the time integral of the four non-martingale
/// terms evaluated at the start state.
ItoResidualReport ito_residual_check(const ExperimentConfig& cfg, int N,
                                     const std::vector<double>& deltas);

/// Named invariant suites (coulomb-identities, renormalization-limit,
/// prop-ratios, sio-probes, osgood, pde-conservation). Prints one line per
/// check; returns true iff all pass. Unknown names throw std::invalid_argument.
bool verify(const std::string& suite, bool quiet = false);
std::vector<std::string> verify_suite_names();

/// Write `content` to `path` atomically (temp file + rename).
void atomic_write(const std::string& path, const std::string& content);

/// Cap worker threads from VORTEXMF_THREADS if set.
void apply_thread_cap();

}  // namespace harness
}  // namespace vortexmf
