#include "vortexmf/euler_pde.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "vortexmf/coulomb.hpp"
#include "vortexmf/detail/fftw_guard.hpp"

namespace vortexmf {

double VorticityGrid::mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * cell_area();
}

double VorticityGrid::min_value() const {
    double m = values.empty() ? 0.0 : values[0];
    for (double v : values) m = std::min(m, v);
    return m;
}

double VorticityGrid::support_radius(double rel_floor) const {
    double mx = 0.0;
    for (double v : values) mx = std::max(mx, std::abs(v));
    const double floor = rel_floor * mx;
    double r = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            if (std::abs(at(i, j)) > floor) {
                const Vec2 c = cell_center(i, j);
                r = std::max(r, std::max(std::abs(c.x), std::abs(c.y)));
            }
    return r;
}

void VorticityGrid::renormalize_mass(double target) {
    const double m = mass();
    if (m == 0.0) throw std::runtime_error("VorticityGrid: cannot renormalize zero mass");
    const double f = target / m;
    for (double& v : values) v *= f;
}

int VorticityGrid::clip_negative(double eps_neg) {
    int out_of_band = 0;
    for (double& v : values) {
        if (v < 0.0) {
            if (v < -eps_neg) ++out_of_band;
            v = 0.0;
        }
    }
    return out_of_band;
}

double VorticityGrid::lp_norm(double p) const {
    if (p <= 0.0) {  // L^infinity
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    double s = 0.0;
    for (double v : values) s += std::pow(std::abs(v), p);
    return std::pow(s * cell_area(), 1.0 / p);
}

VorticityGrid::LogMoments VorticityGrid::moment_check() const {
    LogMoments out;
    const double area = cell_area();
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 c = cell_center(i, j);
            out.first += at(i, j) * 0.5 * std::log1p(c.norm2()) * area;
        }

    // second moment by padded convolution with the smooth kernel ln<z>
    const int m = 2 * n;
    const int mc = m / 2 + 1;
    double* ra;
    double* rk;
    fftw_complex* ca;
    fftw_complex* ck;
    fftw_plan pf, pk, pb;
    {
        std::lock_guard<std::mutex> lock(detail::fftw_mutex());
        ra = fftw_alloc_real(static_cast<size_t>(m) * m);
        rk = fftw_alloc_real(static_cast<size_t>(m) * m);
        ca = fftw_alloc_complex(static_cast<size_t>(m) * mc);
        ck = fftw_alloc_complex(static_cast<size_t>(m) * mc);
        pf = fftw_plan_dft_r2c_2d(m, m, ra, ca, FFTW_ESTIMATE);
        pk = fftw_plan_dft_r2c_2d(m, m, rk, ck, FFTW_ESTIMATE);
        pb = fftw_plan_dft_c2r_2d(m, m, ca, ra, FFTW_ESTIMATE);
    }

    const double hh = h();
    std::memset(ra, 0, sizeof(double) * m * m);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) ra[static_cast<size_t>(j) * m + i] = at(i, j) * area;
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            const int oi = (i <= m / 2) ? i : i - m;
            const int oj = (j <= m / 2) ? j : j - m;
            const double r2 = (oi * hh) * (oi * hh) + (oj * hh) * (oj * hh);
            rk[static_cast<size_t>(j) * m + i] = 0.5 * std::log1p(r2);
        }
    fftw_execute(pf);
    fftw_execute(pk);
    const double scale = 1.0 / (static_cast<double>(m) * m);
    for (size_t q = 0; q < static_cast<size_t>(m) * mc; ++q) {
        const double re = ca[q][0] * ck[q][0] - ca[q][1] * ck[q][1];
        const double im = ca[q][0] * ck[q][1] + ca[q][1] * ck[q][0];
        ca[q][0] = re * scale;
        ca[q][1] = im * scale;
    }
    fftw_execute(pb);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            out.second += at(i, j) * area * ra[static_cast<size_t>(j) * m + i];

    {
        std::lock_guard<std::mutex> lock(detail::fftw_mutex());
        fftw_destroy_plan(pf);
        fftw_destroy_plan(pk);
        fftw_destroy_plan(pb);
        fftw_free(ra);
        fftw_free(rk);
        fftw_free(ca);
        fftw_free(ck);
    }
    return out;
}

double VelocityGrid::max_speed() const {
    double m = 0.0;
    for (size_t q = 0; q < ux.size(); ++q)
        m = std::max(m, std::sqrt(ux[q] * ux[q] + uy[q] * uy[q]));
    return m;
}

// ---------------------------------------------------------------------------

struct SpectralSolver::Impl {
    int n, nc;
    double L;
    std::vector<double> kx, ky;  // wavenumbers per index
    double* r0;
    double* r1;
    double* r2;
    double* r3;
    fftw_complex* c0;
    fftw_complex* c1;
    fftw_complex* c2;
    fftw_plan fwd, bwd;  // planned on (r0, c0); new-array execution elsewhere

    Impl(double L_, int n_) : n(n_), nc(n_ / 2 + 1), L(L_) {
        const size_t nr = static_cast<size_t>(n) * n;
        const size_t ncx = static_cast<size_t>(n) * nc;
        std::lock_guard<std::mutex> lock(detail::fftw_mutex());
        r0 = fftw_alloc_real(nr);
        r1 = fftw_alloc_real(nr);
        r2 = fftw_alloc_real(nr);
        r3 = fftw_alloc_real(nr);
        c0 = fftw_alloc_complex(ncx);
        c1 = fftw_alloc_complex(ncx);
        c2 = fftw_alloc_complex(ncx);
        fwd = fftw_plan_dft_r2c_2d(n, n, r0, c0, FFTW_MEASURE);
        bwd = fftw_plan_dft_c2r_2d(n, n, c0, r0, FFTW_MEASURE);
        kx.resize(n);
        ky.resize(n);
        for (int i = 0; i < n; ++i) {
            const int m = (i <= n / 2) ? i : i - n;
            kx[i] = M_PI * m / L;
            ky[i] = M_PI * m / L;
        }
    }
    ~Impl() {
        std::lock_guard<std::mutex> lock(detail::fftw_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
        fftw_free(r0);
        fftw_free(r1);
        fftw_free(r2);
        fftw_free(r3);
        fftw_free(c0);
        fftw_free(c1);
        fftw_free(c2);
    }

    void forward(double* rin, fftw_complex* cout) { fftw_execute_dft_r2c(fwd, rin, cout); }
    void backward(fftw_complex* cin, double* rout) {
        fftw_execute_dft_c2r(bwd, cin, rout);
        const double s = 1.0 / (static_cast<double>(n) * n);
        for (size_t q = 0; q < static_cast<size_t>(n) * n; ++q) rout[q] *= s;
    }

    // velocity from vorticity: u_hat = i k_perp xi_hat / |k|^2, zero mean mode
    void velocity(const double* xi, double* ux, double* uy) {
        std::memcpy(r0, xi, sizeof(double) * n * n);
        forward(r0, c0);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < nc; ++i) {
                const size_t q = static_cast<size_t>(j) * nc + i;
                const double k2 = kx[i] * kx[i] + ky[j] * ky[j];
                if (k2 == 0.0) {
                    c1[q][0] = c1[q][1] = c2[q][0] = c2[q][1] = 0.0;
                    continue;
                }
                const double re = c0[q][0], im = c0[q][1];
                // ux_hat = -i ky xi_hat / k2 ; uy_hat = i kx xi_hat / k2
                c1[q][0] = ky[j] * im / k2;
                c1[q][1] = -ky[j] * re / k2;
                c2[q][0] = -kx[i] * im / k2;
                c2[q][1] = kx[i] * re / k2;
            }
        backward(c1, ux);
        backward(c2, uy);
    }

    void gradient(const double* f, double* fx, double* fy) {
        std::memcpy(r0, f, sizeof(double) * n * n);
        forward(r0, c0);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < nc; ++i) {
                const size_t q = static_cast<size_t>(j) * nc + i;
                const double re = c0[q][0], im = c0[q][1];
                c1[q][0] = -kx[i] * im;
                c1[q][1] = kx[i] * re;
                c2[q][0] = -ky[j] * im;
                c2[q][1] = ky[j] * re;
            }
        backward(c1, fx);
        backward(c2, fy);
    }

    void dealias(double* f) {
        std::memcpy(r0, f, sizeof(double) * n * n);
        forward(r0, c0);
        const double kcut = M_PI * (n / 3) / L;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < nc; ++i) {
                if (std::abs(kx[i]) > kcut || std::abs(ky[j]) > kcut) {
                    const size_t q = static_cast<size_t>(j) * nc + i;
                    c0[q][0] = c0[q][1] = 0.0;
                }
            }
        backward(c0, f);
    }

    // rhs = -(u . grad) xi, dealiased
    void rhs(const std::vector<double>& xi, std::vector<double>& out) {
        const size_t nr = static_cast<size_t>(n) * n;
        std::vector<double> ux(nr), uy(nr);
        velocity(xi.data(), ux.data(), uy.data());
        gradient(xi.data(), r2, r3);
        out.resize(nr);
        for (size_t q = 0; q < nr; ++q) out[q] = -(ux[q] * r2[q] + uy[q] * r3[q]);
        dealias(out.data());
    }
};

SpectralSolver::SpectralSolver(double L, int n)
    : impl_(std::make_unique<Impl>(L, n)), L_(L), n_(n) {
    if (n % 4 != 0) throw std::invalid_argument("SpectralSolver: n must be a multiple of 4");
}
SpectralSolver::~SpectralSolver() = default;

VelocityGrid SpectralSolver::biot_savart(const VorticityGrid& grid) {
    if (grid.n != n_) throw std::invalid_argument("biot_savart: grid resolution mismatch");
    VelocityGrid u;
    u.n = n_;
    u.ux.resize(grid.values.size());
    u.uy.resize(grid.values.size());
    impl_->velocity(grid.values.data(), u.ux.data(), u.uy.data());
    return u;
}

double SpectralSolver::cfl_dt(const VorticityGrid& grid, double c_adv) {
    const VelocityGrid u = biot_savart(grid);
    const double vmax = u.max_speed();
    if (vmax == 0.0) return std::numeric_limits<double>::infinity();
    return c_adv * grid.h() / vmax;
}

void SpectralSolver::advect(VorticityGrid& grid, double dt) {
    const size_t nr = grid.values.size();
    std::vector<double> f1, f2, mid(nr);
    impl_->rhs(grid.values, f1);
    for (size_t q = 0; q < nr; ++q) mid[q] = grid.values[q] + 0.5 * dt * f1[q];
    impl_->rhs(mid, f2);
    for (size_t q = 0; q < nr; ++q) grid.values[q] += dt * f2[q];
}

double sample_bicubic_periodic(const std::vector<double>& f, int n, double L, const Vec2& p) {
    const double h = 2.0 * L / n;
    auto wrap = [n](int i) {
        i %= n;
        return i < 0 ? i + n : i;
    };
    const double ux = (p.x + L) / h - 0.5;
    const double uy = (p.y + L) / h - 0.5;
    const int ix = static_cast<int>(std::floor(ux));
    const int iy = static_cast<int>(std::floor(uy));
    const double tx = ux - ix;
    const double ty = uy - iy;
    auto wgt = [](double t, double* w) {
        w[0] = 0.5 * (-t * t * t + 2 * t * t - t);
        w[1] = 0.5 * (3 * t * t * t - 5 * t * t + 2);
        w[2] = 0.5 * (-3 * t * t * t + 4 * t * t + t);
        w[3] = 0.5 * (t * t * t - t * t);
    };
    double wx[4], wy[4];
    wgt(tx, wx);
    wgt(ty, wy);
    double s = 0.0;
    for (int b = 0; b < 4; ++b) {
        const int j = wrap(iy - 1 + b);
        double row = 0.0;
        for (int a = 0; a < 4; ++a) row += wx[a] * f[static_cast<size_t>(j) * n + wrap(ix - 1 + a)];
        s += wy[b] * row;
    }
    return s;
}

namespace {

Vec2 noise_field(const NoiseModel& noise, const std::vector<double>& dW, const Vec2& x) {
    Vec2 v;
    for (int k = 0; k < noise.count(); ++k)
        if (dW[k] != 0.0) v += dW[k] * noise.sigma_eval(k, x);
    return v;
}

}  // namespace

void SpectralSolver::step(VorticityGrid& grid, const NoiseModel& noise, const BrownianPath& path,
                          std::uint64_t nstep, double dt) {
    if (grid.n != n_) throw std::invalid_argument("step: grid resolution mismatch");
    const double dt_bound = cfl_dt(grid);
    if (dt > dt_bound) {
        std::ostringstream msg;
        msg << "advective CFL violated: dt=" << dt << " > " << dt_bound;
        throw CflError(msg.str());
    }
    const double mass0 = grid.mass();

    advect(grid, 0.5 * dt);

    // stochastic transport by the frozen field sum_k sigma_k dW^k,
    // midpoint semi-Lagrangian back-tracking
    if (noise.count() > 0) {
        const double sqdt = std::sqrt(dt);
        std::vector<double> dW(noise.count());
        bool any = false;
        for (int k = 0; k < noise.count(); ++k) {
            dW[k] = sqdt * BrownianPath::standard_normal(path.seed, k, nstep);
            any = any || (noise.modes[k].c != 0.0);
        }
        if (any) {
            const std::vector<double> old = grid.values;
            const int n = n_;
            const double L = L_;
#pragma omp parallel for schedule(static)
            for (int j = 0; j < n; ++j) {
                for (int i = 0; i < n; ++i) {
                    const Vec2 x = grid.cell_center(i, j);
                    Vec2 dep = x - noise_field(noise, dW, x);
                    for (int it = 0; it < 3; ++it)
                        dep = x - noise_field(noise, dW, 0.5 * (x + dep));
                    grid.at(i, j) = sample_bicubic_periodic(old, n, L, dep);
                }
            }
        }
    }

    advect(grid, 0.5 * dt);

    grid.clip_negative();
    grid.renormalize_mass(mass0);
    grid.t += dt;

    if (grid.support_radius() > 0.9 * L_)
        throw SupportError("vorticity support reached the sponge region near the box boundary");
}

// ---------------------------------------------------------------------------

void flow_step(FlowMap& flow, const SpectralSolver& solver, const VorticityGrid* grid,
               FlowVelocity mode, double tracer_weight, double blob, const NoiseModel& noise,
               const BrownianPath& path, std::uint64_t n, double dt) {
    const double L = solver.L();
    VelocityGrid u;
    if (mode == FlowVelocity::GridCoupled) {
        if (grid == nullptr) throw std::invalid_argument("flow_step: grid-coupled mode needs a grid");
        u = const_cast<SpectralSolver&>(solver).biot_savart(*grid);
    }

    auto velocity = [&](const Vec2& p) -> Vec2 {
        if (mode == FlowVelocity::GridCoupled) {
            return {sample_bicubic_periodic(u.ux, solver.n(), L, p),
                    sample_bicubic_periodic(u.uy, solver.n(), L, p)};
        }
        // self-consistent: blob-regularized sum over the tracer cloud
        Vec2 acc;
        const double b2 = blob * blob;
        for (size_t m = 0; m < flow.tracers.size(); ++m) {
            const Vec2 d = p - flow.tracers[m];
            const double r2 = d.norm2() + b2;
            if (r2 == 0.0) continue;
            const double f = -tracer_weight * flow.carried_xi0[m] / (coulomb::kTwoPi * r2);
            acc += Vec2{-d.y, d.x} * f;
        }
        return acc;
    };

    const double sqdt = std::sqrt(dt);
    std::vector<double> dW(noise.count());
    for (int k = 0; k < noise.count(); ++k)
        dW[k] = sqdt * BrownianPath::standard_normal(path.seed, k, n);

    const size_t M = flow.tracers.size();
    std::vector<Vec2> v0(M), s0(M), pred(M);
#pragma omp parallel for schedule(static)
    for (long m = 0; m < static_cast<long>(M); ++m) {
        v0[m] = velocity(flow.tracers[m]);
        s0[m] = noise_field(noise, dW, flow.tracers[m]);
        pred[m] = flow.tracers[m] + dt * v0[m] + s0[m];
    }
    // corrector; in self-consistent mode the velocity closure reads the
    // predicted cloud, so swap it in
    std::vector<Vec2> saved;
    if (mode == FlowVelocity::SelfConsistent) {
        saved = flow.tracers;
        flow.tracers = pred;
    }
#pragma omp parallel for schedule(static)
    for (long m = 0; m < static_cast<long>(M); ++m) {
        const Vec2 v1 = velocity(pred[m]);
        const Vec2 s1 = noise_field(noise, dW, pred[m]);
        const Vec2 base = (mode == FlowVelocity::SelfConsistent) ? saved[m] : flow.tracers[m];
        pred[m] = base + 0.5 * dt * (v0[m] + v1) + 0.5 * (s0[m] + s1);
    }
    flow.tracers = pred;
    for (const Vec2& p : flow.tracers)
        if (std::max(std::abs(p.x), std::abs(p.y)) > 0.9 * L)
            throw SupportError("tracer left the box core");
}

VorticityGrid pushforward_histogram(const FlowMap& flow, double tracer_weight, double L, int n) {
    VorticityGrid grid(L, n);
    const double h = grid.h();
    const double inv_area = 1.0 / grid.cell_area();
    auto wrap = [n](int i) {
        i %= n;
        return i < 0 ? i + n : i;
    };
    for (size_t m = 0; m < flow.tracers.size(); ++m) {
        const double w = tracer_weight * flow.carried_xi0[m] * inv_area;
        const double ux = (flow.tracers[m].x + L) / h - 0.5;
        const double uy = (flow.tracers[m].y + L) / h - 0.5;
        const int i0 = static_cast<int>(std::floor(ux));
        const int j0 = static_cast<int>(std::floor(uy));
        const double fx = ux - i0, fy = uy - j0;
        grid.at(wrap(i0), wrap(j0)) += w * (1 - fx) * (1 - fy);
        grid.at(wrap(i0 + 1), wrap(j0)) += w * fx * (1 - fy);
        grid.at(wrap(i0), wrap(j0 + 1)) += w * (1 - fx) * fy;
        grid.at(wrap(i0 + 1), wrap(j0 + 1)) += w * fx * fy;
    }
    return grid;
}

namespace {
// zero the dynamically irrelevant profile tail so support stays in the core
void clip_profile_tail(VorticityGrid& grid) {
    double mx = 0.0;
    for (double v : grid.values) mx = std::max(mx, v);
    for (double& v : grid.values)
        if (v < 1e-13 * mx) v = 0.0;
    grid.renormalize_mass(1.0);
}
}  // namespace

VorticityGrid make_gaussian(double L, int n, double width) {
    VorticityGrid grid(L, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 c = grid.cell_center(i, j);
            grid.at(i, j) = std::exp(-0.5 * c.norm2() / (width * width));
        }
    grid.renormalize_mass(1.0);
    clip_profile_tail(grid);
    return grid;
}

VorticityGrid make_smoothed_disc(double L, int n, double radius, double smoothing) {
    VorticityGrid grid(L, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 c = grid.cell_center(i, j);
            grid.at(i, j) = 1.0 / (1.0 + std::exp((c.norm() - radius) / smoothing));
        }
    grid.renormalize_mass(1.0);
    clip_profile_tail(grid);
    return grid;
}

VorticityGrid make_two_blob(double L, int n, double separation, double width) {
    VorticityGrid grid(L, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 c = grid.cell_center(i, j);
            const Vec2 p1{c.x - 0.5 * separation, c.y};
            const Vec2 p2{c.x + 0.5 * separation, c.y};
            grid.at(i, j) = std::exp(-0.5 * p1.norm2() / (width * width)) +
                            std::exp(-0.5 * p2.norm2() / (width * width));
        }
    grid.renormalize_mass(1.0);
    clip_profile_tail(grid);
    return grid;
}

void write_grid_binary(const VorticityGrid& grid, const std::string& path_prefix) {
    {
        std::ofstream f(path_prefix + ".bin", std::ios::binary);
        f.write(reinterpret_cast<const char*>(grid.values.data()),
                static_cast<std::streamsize>(grid.values.size() * sizeof(double)));
    }
    std::ofstream h(path_prefix + ".hdr");
    h.precision(17);
    h << "L " << grid.L << "\nn " << grid.n << "\nt " << grid.t << "\nmass " << grid.mass()
      << "\n";
}

VorticityGrid read_grid_binary(const std::string& path_prefix) {
    VorticityGrid grid;
    std::ifstream h(path_prefix + ".hdr");
    std::string key;
    double mass = 0.0;
    while (h >> key) {
        if (key == "L") h >> grid.L;
        else if (key == "n") h >> grid.n;
        else if (key == "t") h >> grid.t;
        else if (key == "mass") h >> mass;
    }
    grid.values.resize(static_cast<size_t>(grid.n) * grid.n);
    std::ifstream f(path_prefix + ".bin", std::ios::binary);
    f.read(reinterpret_cast<char*>(grid.values.data()),
           static_cast<std::streamsize>(grid.values.size() * sizeof(double)));
    return grid;
}

void write_grid_csv(const VorticityGrid& grid, const std::string& path, int stride) {
    std::ofstream f(path);
    f << "x,y,xi\n";
    for (int j = 0; j < grid.n; j += stride)
        for (int i = 0; i < grid.n; i += stride) {
            const Vec2 c = grid.cell_center(i, j);
            f << c.x << ',' << c.y << ',' << grid.at(i, j) << '\n';
        }
}

}  // namespace vortexmf
