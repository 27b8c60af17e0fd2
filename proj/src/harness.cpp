#include "vortexmf/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vortexmf/forms_sio.hpp"
#include "vortexmf/free_space.hpp"

namespace vortexmf {
namespace harness {

using nlohmann::json;

void apply_thread_cap() {
    if (const char* env = std::getenv("VORTEXMF_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0) omp_set_num_threads(t);
    }
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        f << content;
    }
    std::filesystem::rename(tmp, path);
}

NoiseModel default_noise_model() {
    NoiseModel nm;
    const double amps[4] = {0.20, 0.15, 0.12, 0.10};
    const Vec2 ks[4] = {{0.7, 0.0}, {0.0, 0.9}, {0.6, 0.6}, {-0.5, 0.8}};
    const double ths[4] = {0.0, 1.1, 2.3, 3.9};
    for (int k = 0; k < 4; ++k) {
        NoiseMode m;
        m.kind = ModeKind::Fourier;
        m.c = amps[k];
        m.k = ks[k];
        m.theta = ths[k];
        nm.modes.push_back(m);
    }
    return nm;
}

namespace {

json noise_to_json(const NoiseModel& nm) {
    json arr = json::array();
    for (const NoiseMode& m : nm.modes) {
        json rec;
        rec["kind"] = (m.kind == ModeKind::Constant) ? "constant" : "fourier";
        rec["c"] = m.c;
        rec["kx"] = m.k.x;
        rec["ky"] = m.k.y;
        rec["theta"] = m.theta;
        rec["dx"] = m.direction.x;
        rec["dy"] = m.direction.y;
        arr.push_back(rec);
    }
    return arr;
}

NoiseModel noise_from_json(const json& arr) {
    NoiseModel nm;
    for (const json& rec : arr) {
        NoiseMode m;
        m.kind = (rec.value("kind", "fourier") == "constant") ? ModeKind::Constant
                                                              : ModeKind::Fourier;
        m.c = rec.value("c", 0.0);
        m.k = {rec.value("kx", 0.0), rec.value("ky", 0.0)};
        m.theta = rec.value("theta", 0.0);
        m.direction = {rec.value("dx", 1.0), rec.value("dy", 0.0)};
        nm.modes.push_back(m);
    }
    return nm;
}

std::string mode_name(RunMode m) {
    switch (m) {
        case RunMode::Coupled: return "coupled";
        case RunMode::ParticlesOnly: return "particles-only";
        case RunMode::PdeOnly: return "pde-only";
        case RunMode::AdditiveNoise: return "additive-noise";
        default: return "verify";
    }
}

RunMode mode_from_name(const std::string& s) {
    if (s == "coupled") return RunMode::Coupled;
    if (s == "particles-only") return RunMode::ParticlesOnly;
    if (s == "pde-only") return RunMode::PdeOnly;
    if (s == "additive-noise") return RunMode::AdditiveNoise;
    if (s == "verify") return RunMode::Verify;
    throw std::invalid_argument("unknown run mode: " + s);
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["n_list"] = cfg.N_list;
    j["grid_n"] = cfg.grid_n;
    j["box_l"] = cfg.box_L;
    j["t_horizon"] = cfg.T;
    j["dt_max"] = cfg.dt_max;
    j["c_cfl"] = cfg.c_cfl;
    j["noise"] = noise_to_json(cfg.noise);
    j["initial"] = {{"profile", cfg.initial.profile},
                    {"width", cfg.initial.width},
                    {"radius", cfg.initial.radius},
                    {"smoothing", cfg.initial.smoothing},
                    {"separation", cfg.initial.separation}};
    j["realizations"] = cfg.realizations;
    j["cadence"] = cfg.cadence;
    j["mode"] = mode_name(cfg.mode);
    j["sampling"] = (cfg.sampling == InitialSampling::Stratified) ? "stratified" : "iid";
    j["additive_nu"] = cfg.additive_nu;
    return j;
}

}  // namespace

std::string ExperimentConfig::hash() const {
    // FNV-1a over the canonical JSON of the semantically meaningful fields
    const std::string s = config_to_json(*this).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    json j;
    f >> j;
    ExperimentConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("n_list")) cfg.N_list = j["n_list"].get<std::vector<int>>();
    cfg.grid_n = j.value("grid_n", cfg.grid_n);
    cfg.box_L = j.value("box_l", cfg.box_L);
    cfg.T = j.value("t_horizon", cfg.T);
    cfg.dt_max = j.value("dt_max", cfg.dt_max);
    cfg.c_cfl = j.value("c_cfl", cfg.c_cfl);
    if (j.contains("noise")) cfg.noise = noise_from_json(j["noise"]);
    else cfg.noise = default_noise_model();
    if (j.contains("initial")) {
        const json& in = j["initial"];
        cfg.initial.profile = in.value("profile", cfg.initial.profile);
        cfg.initial.width = in.value("width", cfg.initial.width);
        cfg.initial.radius = in.value("radius", cfg.initial.radius);
        cfg.initial.smoothing = in.value("smoothing", cfg.initial.smoothing);
        cfg.initial.separation = in.value("separation", cfg.initial.separation);
    }
    cfg.realizations = j.value("realizations", cfg.realizations);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.cadence = j.value("cadence", cfg.cadence);
    if (j.contains("mode")) cfg.mode = mode_from_name(j["mode"].get<std::string>());
    if (j.contains("sampling"))
        cfg.sampling = (j["sampling"] == "iid") ? InitialSampling::Iid : InitialSampling::Stratified;
    cfg.additive_nu = j.value("additive_nu", cfg.additive_nu);
    return cfg;
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
    json j = config_to_json(cfg);
    j["out_dir"] = cfg.out_dir;
    atomic_write(path, j.dump(2) + "\n");
}

VorticityGrid build_initial_grid(const ExperimentConfig& cfg) {
    const InitialDatum& in = cfg.initial;
    if (in.profile == "gaussian") return make_gaussian(cfg.box_L, cfg.grid_n, in.width);
    if (in.profile == "smoothed-disc")
        return make_smoothed_disc(cfg.box_L, cfg.grid_n, in.radius, in.smoothing);
    if (in.profile == "two-blob")
        return make_two_blob(cfg.box_L, cfg.grid_n, in.separation, in.width);
    throw std::invalid_argument("unknown initial profile: " + in.profile);
}

namespace {

// piecewise-constant density -> piecewise-linear CDF inversion
int invert_cdf(const std::vector<double>& cum, double u, double& frac) {
    // cum is inclusive prefix sums normalized to 1
    int lo = 0, hi = static_cast<int>(cum.size()) - 1;
    while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (cum[mid] < u) lo = mid + 1;
        else hi = mid;
    }
    const double prev = (lo == 0) ? 0.0 : cum[lo - 1];
    const double w = cum[lo] - prev;
    frac = (w > 0.0) ? (u - prev) / w : 0.5;
    return lo;
}

std::vector<int> keyed_permutation(int n, std::uint64_t seed, std::uint64_t tag) {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(BrownianPath::uniform01(seed, tag, i) * (i + 1));
        std::swap(perm[i], perm[std::min(j, i)]);
    }
    return perm;
}

}  // namespace

VortexEnsemble sample_initial(const VorticityGrid& grid, int N, InitialSampling mode,
                              std::uint64_t seed, std::uint64_t realization) {
    const int n = grid.n;
    std::vector<double> colmass(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) colmass[i] += grid.at(i, j);
    std::vector<double> colcum(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += colmass[i];
        colcum[i] = acc;
    }
    for (double& c : colcum) c /= acc;

    std::vector<std::vector<double>> condcum(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i) {
        double a = 0.0;
        for (int j = 0; j < n; ++j) {
            a += grid.at(i, j);
            condcum[i][j] = a;
        }
        if (a > 0.0)
            for (double& c : condcum[i]) c /= a;
    }

    const std::uint64_t streams = seed ^ (0x9E3779B97F4A7C15ULL * (realization + 1));
    std::vector<int> p1, p2;
    if (mode == InitialSampling::Stratified) {
        p1 = keyed_permutation(N, streams, 11);
        p2 = keyed_permutation(N, streams, 13);
    }

    VortexEnsemble ens;
    ens.positions.resize(N);
    const double h = grid.h();
    for (int p = 0; p < N; ++p) {
        double u1, u2;
        if (mode == InitialSampling::Stratified) {
            u1 = (p1[p] + BrownianPath::uniform01(streams, p, 21)) / N;
            u2 = (p2[p] + BrownianPath::uniform01(streams, p, 22)) / N;
        } else {
            u1 = BrownianPath::uniform01(streams, p, 21);
            u2 = BrownianPath::uniform01(streams, p, 22);
        }
        double fx, fy;
        const int i = invert_cdf(colcum, u1, fx);
        const int j = invert_cdf(condcum[i], u2, fy);
        ens.positions[p] = {-grid.L + (i + fx) * h, -grid.L + (j + fy) * h};
    }
    return ens;
}

RunRecord run_coupled(const ExperimentConfig& cfg, int N) {
    const auto t_start = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.config_hash = cfg.hash();
    rec.N = N;
    const VorticityGrid grid0 = build_initial_grid(cfg);
    const double eps_reg = bounds::default_eps(std::max(N, 2));

    // one dt for the whole ensemble so every realization consumes the same
    // (mode, step) increment keys
    double dt = cfg.dt_max;
    {
        SpectralSolver solver(cfg.box_L, cfg.grid_n);
        dt = std::min(dt, 0.5 * solver.cfl_dt(grid0));
    }
    const int steps = std::max(1, static_cast<int>(std::ceil(cfg.T / dt - 1e-12)));
    dt = cfg.T / steps;

    rec.series.resize(cfg.realizations);

#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < cfg.realizations; ++r) {
        RealizationSeries series;
        series.realization = r;
        try {
            VortexEnsemble ens =
                sample_initial(grid0, N, cfg.sampling, cfg.seed, static_cast<std::uint64_t>(r));
            VorticityGrid grid = grid0;
            SpectralSolver solver(cfg.box_L, cfg.grid_n);
            BrownianPath path(cfg.seed + 0x9E3779B97F4A7C15ULL * (r + 1), dt);

            auto report = [&](double t) {
                energy::EnergyReport rep = energy::modulated_energy(ens, &grid);
                rep.t = t;
                rep.min_dist = ens.min_pair_distance();
                rep.close_pairs = energy::close_pairs(ens, 0.1);
                rep.hs_distance = energy::sobolev_distance(ens, grid, -2.0);
                series.reports.push_back(rep);
            };
            report(0.0);
            const bool particles = cfg.mode != RunMode::PdeOnly;
            const bool pde = cfg.mode != RunMode::ParticlesOnly &&
                             cfg.mode != RunMode::AdditiveNoise;
            for (int s = 0; s < steps; ++s) {
                if (particles) {
                    if (cfg.mode == RunMode::AdditiveNoise)
                        step_additive(ens, cfg.additive_nu, path, s, dt);
                    else
                        step_stratonovich(ens, cfg.noise, path, s, dt);
                }
                if (pde) solver.step(grid, cfg.noise, path, s, dt);
                if ((s + 1) % cfg.cadence == 0 || s + 1 == steps) report((s + 1) * dt);
            }
        } catch (const std::exception& e) {
            series.failed = true;
            series.failure = e.what();
        }
        rec.series[r] = std::move(series);
    }

    // ensemble statistics over surviving realizations
    size_t nt = 0;
    for (const RealizationSeries& s : rec.series)
        if (!s.failed) nt = std::max(nt, s.reports.size());
    rec.times.assign(nt, 0.0);
    rec.mean_abs_F.assign(nt, 0.0);
    rec.mean_reg_F.assign(nt, 0.0);
    rec.stderr_reg_F.assign(nt, 0.0);
    std::vector<int> counts(nt, 0);
    std::vector<double> sumsq(nt, 0.0);
    for (const RealizationSeries& s : rec.series) {
        if (s.failed) {
            ++rec.excluded;
            continue;
        }
        for (size_t q = 0; q < s.reports.size(); ++q) {
            rec.times[q] = s.reports[q].t;
            const double reg = bounds::regularizer(s.reports[q].F_avg, eps_reg);
            rec.mean_abs_F[q] += std::abs(s.reports[q].F_avg);
            rec.mean_reg_F[q] += reg;
            sumsq[q] += reg * reg;
            ++counts[q];
        }
    }
    for (size_t q = 0; q < nt; ++q) {
        if (counts[q] == 0) continue;
        rec.mean_abs_F[q] /= counts[q];
        rec.mean_reg_F[q] /= counts[q];
        const double var =
            std::max(0.0, sumsq[q] / counts[q] - rec.mean_reg_F[q] * rec.mean_reg_F[q]);
        rec.stderr_reg_F[q] = std::sqrt(var / std::max(1, counts[q]));
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rec;
}

void write_record_json(const RunRecord& rec, const ExperimentConfig& cfg,
                       const std::string& path) {
    json j;
    j["config_hash"] = rec.config_hash;
    j["config"] = config_to_json(cfg);
    j["N"] = rec.N;
    j["excluded"] = rec.excluded;
    j["wall_seconds"] = rec.wall_seconds;
    j["times"] = rec.times;
    j["mean_abs_F"] = rec.mean_abs_F;
    j["mean_reg_F"] = rec.mean_reg_F;
    j["stderr_reg_F"] = rec.stderr_reg_F;
    j["realizations"] = cfg.realizations;
    atomic_write(path, j.dump(2) + "\n");
}

void write_energy_csv(const RunRecord& rec, const std::string& path) {
    std::ostringstream out;
    out.precision(17);
    out << "t,realization,F_avg,term_pp,term_px,term_xx,hs,close_pairs,min_dist\n";
    for (const RealizationSeries& s : rec.series) {
        if (s.failed) continue;
        for (const energy::EnergyReport& r : s.reports)
            out << r.t << ',' << s.realization << ',' << r.F_avg << ',' << r.term_pp << ','
                << r.term_px << ',' << r.term_xx << ',' << r.hs_distance << ',' << r.close_pairs
                << ',' << r.min_dist << '\n';
    }
    atomic_write(path, out.str());
}

SweepResult sweep(const ExperimentConfig& cfg, double fitted_C) {
    SweepResult result;
    const VorticityGrid grid0 = build_initial_grid(cfg);
    const double xi_inf = grid0.lp_norm(0.0);
    const double sg = cfg.noise.norms().grad_sigma;
    for (int N : cfg.N_list) {
        RunRecord rec = run_coupled(cfg, N);
        if (!rec.times.empty()) {
            const size_t last = rec.times.size() - 1;
            SweepRow row;
            row.N = N;
            row.t = rec.times[last];
            row.mean_reg_F = rec.mean_reg_F[last];
            // ensemble H^s distance: mean over surviving realizations
            double hs = 0.0;
            int cnt = 0;
            for (const RealizationSeries& s : rec.series)
                if (!s.failed && !s.reports.empty()) {
                    hs += s.reports.back().hs_distance;
                    ++cnt;
                }
            row.hs = cnt > 0 ? hs / cnt : 0.0;
            bounds::EnvelopeParams ep;
            ep.xi_inf = xi_inf;
            ep.sigma_grad = sg * sg;
            ep.C = fitted_C;
            ep.F0 = rec.mean_abs_F.empty() ? 0.0 : rec.mean_abs_F[0];
            ep.N = N;
            ep.t = row.t;
            row.envelope = bounds::envelope(ep);
            row.admissible = bounds::admissible(ep);
            result.rows.push_back(row);
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

void write_sweep_csv(const SweepResult& s, const std::string& path) {
    std::ostringstream out;
    out.precision(17);
    out << "N,t,mean_reg_F,hs,envelope,admissible\n";
    for (const SweepRow& r : s.rows)
        out << r.N << ',' << r.t << ',' << r.mean_reg_F << ',' << r.hs << ',' << r.envelope << ','
            << (r.admissible ? 1 : 0) << '\n';
    atomic_write(path, out.str());
}

ItoResidualReport ito_residual_check(const ExperimentConfig& cfg, int N,
                                     const std::vector<double>& deltas) {
    ItoResidualReport rep;
    rep.deltas = deltas;
    const VorticityGrid grid0 = build_initial_grid(cfg);
    const VortexEnsemble ens0 = sample_initial(grid0, N, InitialSampling::Stratified, cfg.seed, 0);
    const double eps = bounds::default_eps(N);

    // the four non-martingale terms of the regularized energy identity,
    // evaluated at the start state
    const energy::EnergyReport rep0 = energy::modulated_energy(ens0, &grid0);
    const double F0 = rep0.F_avg;
    const double reg0 = bounds::regularizer(F0, eps);
    const double pref = F0 / reg0;

    forms::SignedMeasurePair m;
    m.particles = &ens0;
    m.field = &grid0;

    SpectralSolver solver(cfg.box_L, cfg.grid_n);
    const forms::VelocityFieldModel u_field = forms::make_biot_savart_field(solver, grid0);
    double rhs = pref * forms::form_K1(u_field, m);
    for (int k = 0; k < cfg.noise.count(); ++k) {
        const forms::VelocityFieldModel sig = forms::make_noise_mode_field(cfg.noise, k);
        // transport coefficient (sigma_k . grad) sigma_k of the k-th mode
        NoiseModel nm = cfg.noise;
        forms::VelocityFieldModel comp;
        comp.name = "sigma-dot-grad-sigma";
        comp.v = [nm, k](const Vec2& x) {
            return nm.grad_sigma_eval(k, x).apply(nm.sigma_eval(k, x));
        };
        comp.grad_v = [nm, k](const Vec2& x) {
            const double h = 1e-5;
            const Vec2 fx = (nm.grad_sigma_eval(k, {x.x + h, x.y}).apply(nm.sigma_eval(k, {x.x + h, x.y})) -
                             nm.grad_sigma_eval(k, {x.x - h, x.y}).apply(nm.sigma_eval(k, {x.x - h, x.y}))) /
                            (2 * h);
            const Vec2 fy = (nm.grad_sigma_eval(k, {x.x, x.y + h}).apply(nm.sigma_eval(k, {x.x, x.y + h})) -
                             nm.grad_sigma_eval(k, {x.x, x.y - h}).apply(nm.sigma_eval(k, {x.x, x.y - h}))) /
                            (2 * h);
            return Mat2{fx.x, fy.x, fx.y, fy.y};
        };
        const double K1_comp = forms::form_K1(comp, m);
        const double K2_sig = forms::form_K2(sig, m);
        const double K1_sig = forms::form_K1(sig, m);
        rhs += 0.5 * pref * K1_comp;
        rhs += 0.5 * pref * K2_sig;
        rhs += 0.5 * (eps * eps / (reg0 * reg0 * reg0)) * K1_sig * K1_sig;
    }
    rep.rhs_at_start = rhs;

    for (double delta : deltas) {
        const int substeps = 4;
        const double dt = delta / substeps;
        double acc = 0.0;
        int good = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : acc, good)
        for (int r = 0; r < cfg.realizations; ++r) {
            try {
                VortexEnsemble ens = ens0;
                VorticityGrid grid = grid0;
                SpectralSolver sol(cfg.box_L, cfg.grid_n);
                BrownianPath path(cfg.seed + 0x9E3779B97F4A7C15ULL * (r + 1), dt);
                for (int s = 0; s < substeps; ++s) {
                    step_stratonovich(ens, cfg.noise, path, s, dt);
                    sol.step(grid, cfg.noise, path, s, dt);
                }
                const energy::EnergyReport repT = energy::modulated_energy(ens, &grid);
                acc += bounds::regularizer(repT.F_avg, eps);
                good += 1;
            } catch (const std::exception&) {
            }
        }
        const double mean_increment = acc / std::max(1, good) - reg0;
        rep.increments.push_back(mean_increment);
        rep.residuals.push_back(std::abs(mean_increment - delta * rhs));
    }

    // least-squares slope of log residual vs log delta
    if (deltas.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const int n = static_cast<int>(deltas.size());
        for (int i = 0; i < n; ++i) {
            const double x = std::log(deltas[i]);
            const double y = std::log(std::max(rep.residuals[i], 1e-300));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        rep.observed_order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return rep;
}

}  // namespace harness
}  // namespace vortexmf
