#include "vortexmf/forms_sio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>

#include "vortexmf/coulomb.hpp"
#include "vortexmf/detail/fftw_guard.hpp"
#include "vortexmf/free_space.hpp"

namespace vortexmf {
namespace forms {

using coulomb::kTwoPi;

namespace {
inline double d(int a, int b) { return a == b ? 1.0 : 0.0; }
inline double zc(const Vec2& z, int a) { return a == 0 ? z.x : z.y; }
inline double mat(const Mat2& m, int i, int j) {
    return i == 0 ? (j == 0 ? m.a00 : m.a01) : (j == 0 ? m.a10 : m.a11);
}

struct GL {
    std::vector<double> x, w;
};

const GL& gl24() {
    static const GL rule = [] {
        GL r;
        const int n = 24;
        r.x.resize(n);
        r.w.resize(n);
        for (int i = 0; i < n; ++i) {
            double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = t;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = n * (t * p1 - p0) / (t * t - 1.0);
                const double dt = p1 / dp;
                t -= dt;
                if (std::abs(dt) < 1e-15) break;
            }
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (t * p1 - p0) / (t * t - 1.0);
            r.x[i] = t;
            r.w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        }
        return r;
    }();
    return rule;
}

// mean of a kernel over the cell at integer offset (oi, oj), cell size h
template <typename F>
double cell_mean(F&& kernel, int oi, int oj, double h) {
    const GL& r = gl24();
    double s = 0.0;
    for (size_t a = 0; a < r.x.size(); ++a)
        for (size_t b = 0; b < r.x.size(); ++b) {
            const Vec2 z{(oi + 0.5 * r.x[a]) * h, (oj + 0.5 * r.x[b]) * h};
            s += r.w[a] * r.w[b] * kernel(z);
        }
    return 0.25 * s;
}

}  // namespace

// --- raw kernels ------------------------------------------------------------

// P_{ag}(z) = d_ag/|z|^2 - 2 z_a z_g / |z|^4  (= -2pi (hess g)_{ag})
static double kerP(int a, int g, const Vec2& z) {
    const double r2 = z.norm2();
    return d(a, g) / r2 - 2.0 * zc(z, a) * zc(z, g) / (r2 * r2);
}

// A_{abg}(z) = -2(d_ag z_b + d_ab z_g + d_gb z_a)/|z|^4 + 8 z_a z_g z_b /|z|^6
static double kerA(int a, int b, int g, const Vec2& z) {
    const double r2 = z.norm2();
    const double r4 = r2 * r2;
    return -2.0 * (d(a, g) * zc(z, b) + d(a, b) * zc(z, g) + d(g, b) * zc(z, a)) / r4 +
           8.0 * zc(z, a) * zc(z, g) * zc(z, b) / (r4 * r2);
}

// S_{abr}(z) = 2(d_ab z_r + d_ar z_b + d_rb z_a)/|z|^4 - 8 z_a z_b z_r /|z|^6
static double kerS(int a, int b, int r, const Vec2& z) { return -kerA(a, b, r, z); }

// Q_{ab,a2b2}(z): the fourth-order block of -2pi dx dy K_{2,v}
static double kerQ(int a, int b, int a2, int b2, const Vec2& z) {
    const double r2 = z.norm2();
    const double r4 = r2 * r2;
    const double r6 = r4 * r2;
    const double r8 = r4 * r4;
    const double za = zc(z, a), zb = zc(z, b), za2 = zc(z, a2), zb2 = zc(z, b2);
    return 2.0 * (d(a, b) * d(a2, b2) + d(a, a2) * d(b, b2) + d(a2, b) * d(a, b2)) / r4 -
           8.0 * d(a, b) * za2 * zb2 / r6 - 8.0 * (d(a, a2) * zb + d(a2, b) * za) * zb2 / r6 -
           8.0 * (d(a, b2) * zb * za2 + d(b, b2) * za * za2 + d(a2, b2) * za * zb) / r6 +
           48.0 * za * zb * za2 * zb2 / r8;
}

double kernel_K0(int a, int b, const Vec2& z) {
    if (z.norm2() == 0.0) throw std::domain_error("kernel_K0: z = 0");
    return -kerP(a, b, z) / kTwoPi;
}
double kernel_K1(int a, int b, int r, int nu, const Vec2& z) {
    if (z.norm2() == 0.0) throw std::domain_error("kernel_K1: z = 0");
    return kerS(a, b, r, z) * zc(z, nu) / kTwoPi;
}
double kernel_K2(int a, int b, int a2, int b2, int g1, int g2, const Vec2& z) {
    if (z.norm2() == 0.0) throw std::domain_error("kernel_K2: z = 0");
    return kerQ(a, b, a2, b2, z) * zc(z, g1) * zc(z, g2) / kTwoPi;
}

// --- boundary constants (S^1 quadrature, arc-length measure) ----------------

namespace {
template <typename F>
double circle_integral(F&& f, int nodes = 4096) {
    double s = 0.0;
    for (int q = 0; q < nodes; ++q) {
        const double th = kTwoPi * (q + 0.5) / nodes;
        s += f(Vec2{std::cos(th), std::sin(th)});
    }
    return s * kTwoPi / nodes;
}
}  // namespace

double boundary_constant_C(int beta, int gamma) {
    return -circle_integral([&](const Vec2& u) { return zc(u, beta) * zc(u, gamma); }) / kTwoPi;
}

double boundary_constant_C1(int alpha, int rho, int beta, int gamma) {
    return -circle_integral([&](const Vec2& u) {
               return zc(u, beta) * (d(alpha, gamma) - 2.0 * zc(u, alpha) * zc(u, gamma)) *
                      zc(u, rho);
           }) /
           kTwoPi;
}

double boundary_constant_C2a(int g1, int g2, int b2, int a, int b, int a2) {
    return circle_integral([&](const Vec2& u) {
               return (2.0 * (d(a, b) * zc(u, a2) + d(a, a2) * zc(u, b) + d(a2, b) * zc(u, a)) -
                       8.0 * zc(u, a) * zc(u, b) * zc(u, a2)) *
                      zc(u, g1) * zc(u, g2) * zc(u, b2);
           }) /
           kTwoPi;
}

double boundary_constant_C2b(int g1, int b2, int a, int b) {
    return circle_integral([&](const Vec2& u) {
               return (-d(a, b) + 2.0 * zc(u, a) * zc(u, b)) * zc(u, b2) * zc(u, g1);
           }) /
           kTwoPi;
}

// --- diagonal limits ---------------------------------------------------------

double k1_diagonal_limit(const Mat2& grad_v) { return -grad_v.trace() / (2.0 * kTwoPi); }

double k2_diagonal_limit(const Mat2& A) {
    const double tr = A.trace();
    const double trA2 = A.a00 * A.a00 + A.a11 * A.a11 + 2.0 * A.a01 * A.a10;
    const double fro = A.frobenius2();
    return (0.25 * (tr * tr + trA2 + fro) - 0.5 * fro) / kTwoPi;
}

// --- velocity field models ----------------------------------------------------

VelocityFieldModel make_constant_field(const Vec2& value) {
    VelocityFieldModel m;
    m.name = "constant";
    m.v = [value](const Vec2&) { return value; };
    m.grad_v = [](const Vec2&) { return Mat2{}; };
    m.sup_norm = value.norm();
    m.lip = 0.0;
    m.log_lip = 0.0;
    return m;
}

VelocityFieldModel make_linear_field(const Mat2& A) {
    VelocityFieldModel m;
    m.name = "linear";
    m.v = [A](const Vec2& x) { return A.apply(x); };
    m.grad_v = [A](const Vec2&) { return A; };
    m.sup_norm = std::numeric_limits<double>::infinity();
    m.lip = std::sqrt(A.frobenius2());
    m.log_lip = m.lip;
    return m;
}

VelocityFieldModel make_identity_field() {
    VelocityFieldModel m = make_linear_field(Mat2::identity());
    m.name = "identity";
    return m;
}

VelocityFieldModel make_noise_mode_field(const NoiseModel& model, int k) {
    VelocityFieldModel m;
    m.name = "noise-mode";
    NoiseModel copy = model;
    m.v = [copy, k](const Vec2& x) { return copy.sigma_eval(k, x); };
    m.grad_v = [copy, k](const Vec2& x) { return copy.grad_sigma_eval(k, x); };
    const NoiseMode& mode = model.modes[k];
    m.sup_norm = std::abs(mode.c);
    m.lip = (mode.kind == ModeKind::Fourier) ? std::abs(mode.c) * mode.k.norm() : 0.0;
    m.log_lip = m.lip;
    return m;
}

VelocityFieldModel make_random_fourier_field(std::uint64_t seed, int modes, double amplitude) {
    NoiseModel nm;
    for (int j = 0; j < modes; ++j) {
        NoiseMode mode;
        mode.kind = ModeKind::Fourier;
        const double kx = 0.5 + 2.5 * BrownianPath::uniform01(seed, 2 * j, 101);
        const double ky = -1.5 + 3.0 * BrownianPath::uniform01(seed, 2 * j + 1, 101);
        mode.k = {kx, ky};
        mode.theta = kTwoPi * BrownianPath::uniform01(seed, j, 202);
        mode.c = amplitude * (0.3 + 0.7 * BrownianPath::uniform01(seed, j, 303));
        nm.modes.push_back(mode);
    }
    VelocityFieldModel m;
    m.name = "random-fourier";
    m.v = [nm](const Vec2& x) {
        Vec2 acc;
        for (int k = 0; k < nm.count(); ++k) acc += nm.sigma_eval(k, x);
        return acc;
    };
    m.grad_v = [nm](const Vec2& x) {
        Mat2 acc;
        for (int k = 0; k < nm.count(); ++k) acc += nm.grad_sigma_eval(k, x);
        return acc;
    };
    double sup = 0.0, lip = 0.0;
    for (const NoiseMode& mode : nm.modes) {
        sup += std::abs(mode.c);
        lip += std::abs(mode.c) * mode.k.norm();
    }
    m.sup_norm = sup;
    m.lip = lip;
    m.log_lip = lip;
    return m;
}

VelocityFieldModel make_log_lipschitz_field(double amplitude) {
    // shear profile built from s ln(1/s): log-Lipschitz, not Lipschitz
    const double e_inv = std::exp(-1.0);
    auto phi = [e_inv](double s) {
        s = std::abs(s);
        if (s == 0.0) return 0.0;
        if (s >= e_inv) return e_inv;
        return s * std::log(1.0 / s);
    };
    auto dphi = [e_inv](double s) {
        const double as = std::abs(s);
        if (as == 0.0 || as >= e_inv) return 0.0;
        const double v = std::log(1.0 / as) - 1.0;
        return s >= 0 ? v : -v;
    };
    VelocityFieldModel m;
    m.name = "log-lipschitz";
    m.v = [=](const Vec2& x) { return Vec2{amplitude * phi(x.y), 0.0}; };
    m.grad_v = [=](const Vec2& x) { return Mat2{0.0, amplitude * dphi(x.y), 0.0, 0.0}; };
    m.sup_norm = amplitude * e_inv;
    m.lip = std::numeric_limits<double>::infinity();
    m.log_lip = amplitude;
    return m;
}

VelocityFieldModel make_biot_savart_field(const SpectralSolver& solver,
                                          const VorticityGrid& grid) {
    auto u = std::make_shared<VelocityGrid>(const_cast<SpectralSolver&>(solver).biot_savart(grid));
    const int n = grid.n;
    const double L = grid.L;
    const double h = grid.h();
    // centered-difference Jacobian grids for the model's derivative closure
    auto dg = std::make_shared<std::array<std::vector<double>, 4>>();
    for (auto& v : *dg) v.resize(static_cast<size_t>(n) * n);
    auto idx = [n](int i, int j) {
        auto w = [n](int a) { return ((a % n) + n) % n; };
        return static_cast<size_t>(w(j)) * n + w(i);
    };
    double lip = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double uxx = (u->ux[idx(i + 1, j)] - u->ux[idx(i - 1, j)]) / (2 * h);
            const double uxy = (u->ux[idx(i, j + 1)] - u->ux[idx(i, j - 1)]) / (2 * h);
            const double uyx = (u->uy[idx(i + 1, j)] - u->uy[idx(i - 1, j)]) / (2 * h);
            const double uyy = (u->uy[idx(i, j + 1)] - u->uy[idx(i, j - 1)]) / (2 * h);
            (*dg)[0][idx(i, j)] = uxx;
            (*dg)[1][idx(i, j)] = uxy;
            (*dg)[2][idx(i, j)] = uyx;
            (*dg)[3][idx(i, j)] = uyy;
            lip = std::max(lip, std::sqrt(uxx * uxx + uxy * uxy + uyx * uyx + uyy * uyy));
        }
    VelocityFieldModel m;
    m.name = "biot-savart";
    m.v = [u, n, L](const Vec2& x) {
        return Vec2{sample_bicubic_periodic(u->ux, n, L, x),
                    sample_bicubic_periodic(u->uy, n, L, x)};
    };
    m.grad_v = [dg, n, L](const Vec2& x) {
        return Mat2{sample_bicubic_periodic((*dg)[0], n, L, x),
                    sample_bicubic_periodic((*dg)[1], n, L, x),
                    sample_bicubic_periodic((*dg)[2], n, L, x),
                    sample_bicubic_periodic((*dg)[3], n, L, x)};
    };
    m.sup_norm = u->max_speed();
    m.lip = 1.05 * lip;
    m.log_lip = m.lip;
    return m;
}

// --- mollifier ----------------------------------------------------------------

namespace {

// C-infinity step on [0,1]
double smoothstep(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

double chi_shape(double r, double q) {
    if (r <= 0.25) return 1.0;
    if (r >= 1.0) return 0.0;
    return std::pow(smoothstep((1.0 - r) / 0.75), q);
}

// plateau exponent tuned once so the 2D mass is exactly one
double chi_exponent() {
    static const double q = [] {
        auto mass = [](double qq) {
            const int nr = 4000;
            double s = 0.0;
            for (int i = 0; i < nr; ++i) {
                const double r = (i + 0.5) / nr;
                s += chi_shape(r, qq) * r / nr;
            }
            return kTwoPi * s;
        };
        double lo = 1e-3, hi = 64.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (mass(mid) > 1.0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }();
    return q;
}

}  // namespace

double mollifier_chi(double r) { return chi_shape(r, chi_exponent()); }

VelocityFieldModel mollify(const VelocityFieldModel& vm, double eps) {
    if (!(eps > 0.0 && eps < std::exp(-1.0)))
        throw std::invalid_argument("mollify: eps must lie in (0, e^-1)");
    // polar stencil of chi_eps, weights normalized to unit mass
    const int nr = 24, nth = 32;
    auto nodes = std::make_shared<std::vector<Vec2>>();
    auto weights = std::make_shared<std::vector<double>>();
    double wsum = 0.0;
    for (int i = 0; i < nr; ++i) {
        const double r = eps * (i + 0.5) / nr;
        const double wr = mollifier_chi(r / eps) * r * (eps / nr);
        for (int t = 0; t < nth; ++t) {
            const double th = kTwoPi * t / nth;
            nodes->push_back({r * std::cos(th), r * std::sin(th)});
            weights->push_back(wr * kTwoPi / nth);
            wsum += weights->back();
        }
    }
    for (double& w : *weights) w /= wsum;  // unit total mass

    VelocityFieldModel out;
    out.name = vm.name + "-mollified";
    auto base_v = vm.v;
    auto base_g = vm.grad_v;
    out.v = [base_v, nodes, weights](const Vec2& x) {
        Vec2 acc;
        for (size_t q = 0; q < nodes->size(); ++q) acc += (*weights)[q] * base_v(x - (*nodes)[q]);
        return acc;
    };
    out.grad_v = [base_g, nodes, weights](const Vec2& x) {
        Mat2 acc;
        for (size_t q = 0; q < nodes->size(); ++q) acc += (*weights)[q] * base_g(x - (*nodes)[q]);
        return acc;
    };
    out.sup_norm = vm.sup_norm;
    // sampled gradient sup over a working box
    double lip = 0.0;
    for (int s = 0; s < 400; ++s) {
        const Vec2 p{-3.0 + 6.0 * BrownianPath::uniform01(7, s, 0),
                     -3.0 + 6.0 * BrownianPath::uniform01(7, s, 1)};
        lip = std::max(lip, std::sqrt(out.grad_v(p).frobenius2()));
    }
    out.lip = lip;
    out.log_lip = vm.log_lip;
    return out;
}

// --- bilinear forms -----------------------------------------------------------

double SignedMeasurePair::total_signed_mass() const {
    double m = 0.0;
    if (particles != nullptr) m += 1.0;
    if (field != nullptr) m -= field->mass();
    return m;
}

namespace {

// shared gradient-convolution table for the grid-grid parts
const free_space::PotentialTable& grad_table(double L, int n) {
    static std::mutex mx;
    static std::map<std::pair<double, int>, std::unique_ptr<free_space::PotentialTable>> cache;
    std::lock_guard<std::mutex> lock(mx);
    auto& slot = cache[{L, n}];
    if (!slot) slot = std::make_unique<free_space::PotentialTable>(L, n);
    return *slot;
}

VorticityGrid weighted_grid(const VorticityGrid& base, const std::vector<double>& w) {
    VorticityGrid g = base;
    for (size_t q = 0; q < g.values.size(); ++q) g.values[q] *= w[q];
    return g;
}

}  // namespace

double form_K1(const VelocityFieldModel& vm, const SignedMeasurePair& m) {
    double total = 0.0;
    const VortexEnsemble* ens = m.particles;
    const VorticityGrid* grid = m.field;

    if (ens != nullptr) {
        const int N = ens->size();
        double pp = 0.0;
#pragma omp parallel for reduction(+ : pp) schedule(static)
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                if (j == i) continue;
                const Vec2 z = ens->positions[i] - ens->positions[j];
                if (z.norm2() == 0.0) throw std::invalid_argument("form_K1: coincident particles");
                pp += coulomb::grad_g_trunc(z, 0.0)
                          .dot(vm.v(ens->positions[i]) - vm.v(ens->positions[j]));
            }
        total += pp / (static_cast<double>(N) * N);
    }

    if (grid != nullptr && ens != nullptr) {
        const int N = ens->size();
        const int n = grid->n;
        const double area = grid->cell_area();
        double cross = 0.0;
#pragma omp parallel for reduction(+ : cross) schedule(static)
        for (int i = 0; i < N; ++i) {
            const Vec2 xi = ens->positions[i];
            const Vec2 vi = vm.v(xi);
            const double h = grid->h();
            const int ci = static_cast<int>(std::floor((xi.x + grid->L) / h));
            const int cj = static_cast<int>(std::floor((xi.y + grid->L) / h));
            double acc = 0.0;
            for (int jj = 0; jj < n; ++jj)
                for (int ii = 0; ii < n; ++ii) {
                    const double mu = grid->at(ii, jj);
                    if (mu == 0.0) continue;
                    if (ii == ci && jj == cj) {
                        acc += mu * k1_diagonal_limit(vm.grad_v(xi));
                        continue;
                    }
                    const Vec2 yc = grid->cell_center(ii, jj);
                    acc += mu * coulomb::grad_g_trunc(xi - yc, 0.0).dot(vi - vm.v(yc));
                }
            cross += acc * area;
        }
        // measure signs: particle +1/N each, field -1; the cross term appears twice
        total += -2.0 * cross / N;
    }

    if (grid != nullptr) {
        const int n = grid->n;
        const double area = grid->cell_area();
        std::vector<double> v0(static_cast<size_t>(n) * n), v1(v0.size());
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const Vec2 vv = vm.v(grid->cell_center(i, j));
                v0[static_cast<size_t>(j) * n + i] = vv.x;
                v1[static_cast<size_t>(j) * n + i] = vv.y;
            }
        const auto& tab = grad_table(grid->L, n);
        std::vector<double> gx, gy, wx, wy, tmpx, tmpy;
        tab.gradient(*grid, gx, gy);
        tab.gradient(weighted_grid(*grid, v0), wx, tmpy);
        tab.gradient(weighted_grid(*grid, v1), tmpx, wy);
        double ff = 0.0;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const size_t q = static_cast<size_t>(j) * n + i;
                const double xi = grid->values[q];
                ff += xi * (v0[q] * gx[q] - wx[q] + v1[q] * gy[q] - wy[q]) * area;
                // coincident-cell pair with the diagonal-limit value
                ff += xi * xi * area * area * k1_diagonal_limit(vm.grad_v(grid->cell_center(i, j)));
            }
        total += ff;
    }
    return total;
}

double form_K2(const VelocityFieldModel& vm, const SignedMeasurePair& m) {
    double total = 0.0;
    const VortexEnsemble* ens = m.particles;
    const VorticityGrid* grid = m.field;

    if (ens != nullptr) {
        const int N = ens->size();
        double pp = 0.0;
#pragma omp parallel for reduction(+ : pp) schedule(static)
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                if (j == i) continue;
                const Vec2 z = ens->positions[i] - ens->positions[j];
                if (z.norm2() == 0.0) throw std::invalid_argument("form_K2: coincident particles");
                const Vec2 dv = vm.v(ens->positions[i]) - vm.v(ens->positions[j]);
                pp += coulomb::hess_g(z).contract(Mat2::outer(dv, dv));
            }
        total += pp / (static_cast<double>(N) * N);
    }

    if (grid != nullptr && ens != nullptr) {
        const int N = ens->size();
        const int n = grid->n;
        const double area = grid->cell_area();
        double cross = 0.0;
#pragma omp parallel for reduction(+ : cross) schedule(static)
        for (int i = 0; i < N; ++i) {
            const Vec2 xi = ens->positions[i];
            const Vec2 vi = vm.v(xi);
            const double h = grid->h();
            const int ci = static_cast<int>(std::floor((xi.x + grid->L) / h));
            const int cj = static_cast<int>(std::floor((xi.y + grid->L) / h));
            double acc = 0.0;
            for (int jj = 0; jj < n; ++jj)
                for (int ii = 0; ii < n; ++ii) {
                    const double mu = grid->at(ii, jj);
                    if (mu == 0.0) continue;
                    if (ii == ci && jj == cj) {
                        acc += mu * k2_diagonal_limit(vm.grad_v(xi));
                        continue;
                    }
                    const Vec2 yc = grid->cell_center(ii, jj);
                    const Vec2 dv = vi - vm.v(yc);
                    acc += mu * coulomb::hess_g(xi - yc).contract(Mat2::outer(dv, dv));
                }
            cross += acc * area;
        }
        total += -2.0 * cross / N;
    }

    if (grid != nullptr) {
        // sum_{ab} [ int xi v^a v^b (H_ab * xi) - 2 int xi v^a (H_ab * v^b xi)
        //            + int xi (H_ab * v^a v^b xi) ] with H = hess g
        const int n = grid->n;
        const double area = grid->cell_area();
        const double L = grid->L;
        const double h = grid->h();
        const int mpad = 2 * n, mc = mpad / 2 + 1;
        std::vector<double> v0(static_cast<size_t>(n) * n), v1(v0.size());
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const Vec2 vv = vm.v(grid->cell_center(i, j));
                v0[static_cast<size_t>(j) * n + i] = vv.x;
                v1[static_cast<size_t>(j) * n + i] = vv.y;
            }

        // padded FFT convolution machinery local to this call
        double* rb;
        fftw_complex* cb;
        fftw_plan pf, pb;
        {
            std::lock_guard<std::mutex> lock(detail::fftw_mutex());
            rb = fftw_alloc_real(static_cast<size_t>(mpad) * mpad);
            cb = fftw_alloc_complex(static_cast<size_t>(mpad) * mc);
            pf = fftw_plan_dft_r2c_2d(mpad, mpad, rb, cb, FFTW_ESTIMATE);
            pb = fftw_plan_dft_c2r_2d(mpad, mpad, cb, rb, FFTW_ESTIMATE);
        }
        auto spectrum = [&](const std::vector<double>& core) {
            std::memset(rb, 0, sizeof(double) * mpad * mpad);
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i)
                    rb[static_cast<size_t>(j) * mpad + i] =
                        core[static_cast<size_t>(j) * n + i] * area;
            fftw_execute_dft_r2c(pf, rb, cb);
            std::vector<double> s(2 * static_cast<size_t>(mpad) * mc);
            for (size_t q = 0; q < static_cast<size_t>(mpad) * mc; ++q) {
                s[2 * q] = cb[q][0];
                s[2 * q + 1] = cb[q][1];
            }
            return s;
        };
        auto hess_kernel_spectrum = [&](int a, int b) {
            for (int j = 0; j < mpad; ++j)
                for (int i = 0; i < mpad; ++i) {
                    const int oi = (i <= mpad / 2) ? i : i - mpad;
                    const int oj = (j <= mpad / 2) ? j : j - mpad;
                    double val = 0.0;
                    if (oi != 0 || oj != 0) {
                        if (std::abs(oi) <= 3 && std::abs(oj) <= 3) {
                            val = cell_mean(
                                [&](const Vec2& z) { return mat(coulomb::hess_g(z), a, b); }, oi,
                                oj, h);
                        } else {
                            const Mat2 H = coulomb::hess_g({oi * h, oj * h});
                            val = mat(H, a, b);
                        }
                    }
                    rb[static_cast<size_t>(j) * mpad + i] = val;
                }
            fftw_execute_dft_r2c(pf, rb, cb);
            std::vector<double> s(2 * static_cast<size_t>(mpad) * mc);
            for (size_t q = 0; q < static_cast<size_t>(mpad) * mc; ++q) {
                s[2 * q] = cb[q][0];
                s[2 * q + 1] = cb[q][1];
            }
            return s;
        };
        auto convolve = [&](const std::vector<double>& ker, const std::vector<double>& inp) {
            const double scale = 1.0 / (static_cast<double>(mpad) * mpad);
            for (size_t q = 0; q < static_cast<size_t>(mpad) * mc; ++q) {
                const double re = inp[2 * q] * ker[2 * q] - inp[2 * q + 1] * ker[2 * q + 1];
                const double im = inp[2 * q] * ker[2 * q + 1] + inp[2 * q + 1] * ker[2 * q];
                cb[q][0] = re * scale;
                cb[q][1] = im * scale;
            }
            fftw_execute_dft_c2r(pb, cb, rb);
            std::vector<double> out(static_cast<size_t>(n) * n);
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i)
                    out[static_cast<size_t>(j) * n + i] = rb[static_cast<size_t>(j) * mpad + i];
            return out;
        };

        std::array<std::vector<double>, 3> inw;  // v0v0, v0v1, v1v1 weighted xi
        std::vector<double> base = grid->values;
        std::vector<double> xv0(base.size()), xv1(base.size()), xv00(base.size()),
            xv01(base.size()), xv11(base.size());
        for (size_t q = 0; q < base.size(); ++q) {
            xv0[q] = base[q] * v0[q];
            xv1[q] = base[q] * v1[q];
            xv00[q] = base[q] * v0[q] * v0[q];
            xv01[q] = base[q] * v0[q] * v1[q];
            xv11[q] = base[q] * v1[q] * v1[q];
        }
        const std::vector<double> Sxi = spectrum(base), Sx0 = spectrum(xv0), Sx1 = spectrum(xv1),
                                  S00 = spectrum(xv00), S01 = spectrum(xv01),
                                  S11 = spectrum(xv11);
        double ff = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                const std::vector<double> K = hess_kernel_spectrum(a, b);
                const std::vector<double>& Sb = (b == 0) ? Sx0 : Sx1;
                const std::vector<double>& Sab =
                    (a == 0 && b == 0) ? S00 : ((a == 1 && b == 1) ? S11 : S01);
                const std::vector<double> c1 = convolve(K, Sxi);
                const std::vector<double> c2 = convolve(K, Sb);
                const std::vector<double> c3 = convolve(K, Sab);
                const std::vector<double>& va = (a == 0) ? v0 : v1;
                const std::vector<double>& vb = (b == 0) ? v0 : v1;
                for (size_t q = 0; q < base.size(); ++q)
                    ff += base[q] * (va[q] * vb[q] * c1[q] - 2.0 * va[q] * c2[q] + c3[q]) * area;
            }
        // coincident-cell pairs
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const size_t q = static_cast<size_t>(j) * n + i;
                ff += base[q] * base[q] * area * area *
                      k2_diagonal_limit(vm.grad_v(grid->cell_center(i, j)));
            }
        {
            std::lock_guard<std::mutex> lock(detail::fftw_mutex());
            fftw_destroy_plan(pf);
            fftw_destroy_plan(pb);
            fftw_free(rb);
            fftw_free(cb);
        }
        total += ff;
    }
    return total;
}

// --- discrete grad T grad ------------------------------------------------------

namespace {

// kernel id encoding: kind * 10000 + packed indices (canonicalized under the
// kernels' index symmetries)
enum KernelKind { KA = 0, KP = 1, KQ = 2, KS = 3 };

int kid_A(int a, int b, int g) {
    int v[3] = {a, b, g};
    std::sort(v, v + 3);
    return KA * 10000 + v[0] * 100 + v[1] * 10 + v[2];
}
int kid_P(int a, int g) {
    if (a > g) std::swap(a, g);
    return KP * 10000 + a * 10 + g;
}
int kid_Q(int a, int b, int a2, int b2) {
    if (a > b) std::swap(a, b);
    if (a2 > b2) std::swap(a2, b2);
    return KQ * 10000 + a * 1000 + b * 100 + a2 * 10 + b2;
}
int kid_S(int a, int b, int r) {
    int v[3] = {a, b, r};
    std::sort(v, v + 3);
    return KS * 10000 + v[0] * 100 + v[1] * 10 + v[2];
}

double eval_kernel(int kid, const Vec2& z) {
    const int kind = kid / 10000;
    const int ix = kid % 10000;
    switch (kind) {
        case KA: return kerA(ix / 100, (ix / 10) % 10, ix % 10, z);
        case KP: return kerP((ix / 10) % 10, ix % 10, z);
        case KQ: return kerQ(ix / 1000, (ix / 100) % 10, (ix / 10) % 10, ix % 10, z);
        default: return kerS(ix / 100, (ix / 10) % 10, ix % 10, z);
    }
}

// PV residue over the unit cell of a net-degree(-2) kernel with zero circle
// mean: int F = int F_hat(theta) ln r_edge(theta) dtheta
template <typename F>
double cell_residue(F&& unit_eval) {
    const GL& r = gl24();
    double s = 0.0;
    for (int oct = 0; oct < 8; ++oct) {
        const double t0 = -M_PI + oct * M_PI / 4.0;
        const double t1 = t0 + M_PI / 4.0;
        for (size_t q = 0; q < r.x.size(); ++q) {
            const double th = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * r.x[q];
            const double w = 0.5 * (t1 - t0) * r.w[q];
            const Vec2 u{std::cos(th), std::sin(th)};
            const double redge = 0.5 / std::max(std::abs(u.x), std::abs(u.y));
            s += w * unit_eval(u) * std::log(redge);
        }
    }
    return s;
}

struct Term {
    int kid;
    int pre;    // field id multiplying the input, -1 for none
    int post;   // field id multiplying the conv output, -1 for none
    double coeff;
};

// field ids: 0,1 -> v components; 2..4 -> v v products (00,01,11);
// 5..8 -> dv[a][b] = d_b v^a; 9..16 -> dv[a][b] * v^c
int fid_V(int a) { return a; }
int fid_VV(int a, int b) { return 2 + a + b; }
int fid_DV(int a, int b) { return 5 + a * 2 + b; }
int fid_DVV(int a, int b, int c) { return 9 + (a * 2 + b) * 2 + c; }

}  // namespace

struct SioWorkspace::Impl {
    int n, m, mc;
    double L, h;
    double* rb;
    fftw_complex* cb;
    fftw_plan pf, pbw;
    std::map<int, std::vector<double>> spec_cache;
    // residues
    double RA[2][2][2][2];
    double RQ[2][2][2][2][2][2];
    double RS[2][2][2][2];

    Impl(double L_, int n_) : n(n_), m(2 * n_), mc(n_ + 1), L(L_), h(2.0 * L_ / n_) {
        {
            std::lock_guard<std::mutex> lock(detail::fftw_mutex());
            rb = fftw_alloc_real(static_cast<size_t>(m) * m);
            cb = fftw_alloc_complex(static_cast<size_t>(m) * mc);
            pf = fftw_plan_dft_r2c_2d(m, m, rb, cb, FFTW_MEASURE);
            pbw = fftw_plan_dft_c2r_2d(m, m, cb, rb, FFTW_MEASURE);
        }
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int g = 0; g < 2; ++g) {
                    for (int r = 0; r < 2; ++r) {
                        RA[a][b][g][r] = cell_residue(
                            [&](const Vec2& u) { return kerA(a, b, g, u) * zc(u, r); });
                        RS[a][b][g][r] = cell_residue(
                            [&](const Vec2& u) { return kerS(a, b, g, u) * zc(u, r); });
                        for (int a2 = 0; a2 < 2; ++a2)
                            for (int b2 = 0; b2 < 2; ++b2)
                                RQ[a][b][a2][b2][g][r] = cell_residue([&](const Vec2& u) {
                                    return kerQ(a, b, a2, b2, u) * zc(u, g) * zc(u, r);
                                });
                    }
                }
    }
    ~Impl() {
        std::lock_guard<std::mutex> lock(detail::fftw_mutex());
        fftw_destroy_plan(pf);
        fftw_destroy_plan(pbw);
        fftw_free(rb);
        fftw_free(cb);
    }

    const std::vector<double>& kernel_spectrum(int kid) {
        auto it = spec_cache.find(kid);
        if (it != spec_cache.end()) return it->second;
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i) {
                const int oi = (i <= m / 2) ? i : i - m;
                const int oj = (j <= m / 2) ? j : j - m;
                double val = 0.0;
                if (oi != 0 || oj != 0) {
                    if (std::abs(oi) <= 3 && std::abs(oj) <= 3)
                        val = cell_mean([&](const Vec2& z) { return eval_kernel(kid, z); }, oi, oj,
                                        h);
                    else
                        val = eval_kernel(kid, {oi * h, oj * h});
                }
                rb[static_cast<size_t>(j) * m + i] = val * h * h;  // quadrature weight folded in
            }
        fftw_execute_dft_r2c(pf, rb, cb);
        std::vector<double> s(2 * static_cast<size_t>(m) * mc);
        for (size_t q = 0; q < static_cast<size_t>(m) * mc; ++q) {
            s[2 * q] = cb[q][0];
            s[2 * q + 1] = cb[q][1];
        }
        return spec_cache.emplace(kid, std::move(s)).first->second;
    }

    std::vector<double> fwd_spectrum(const std::vector<double>& core) {
        std::memset(rb, 0, sizeof(double) * m * m);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                rb[static_cast<size_t>(j) * m + i] = core[static_cast<size_t>(j) * n + i];
        fftw_execute_dft_r2c(pf, rb, cb);
        std::vector<double> s(2 * static_cast<size_t>(m) * mc);
        for (size_t q = 0; q < static_cast<size_t>(m) * mc; ++q) {
            s[2 * q] = cb[q][0];
            s[2 * q + 1] = cb[q][1];
        }
        return s;
    }

    std::vector<double> convolve(int kid, const std::vector<double>& inspec) {
        const std::vector<double>& ker = kernel_spectrum(kid);
        const double scale = 1.0 / (static_cast<double>(m) * m);
        for (size_t q = 0; q < static_cast<size_t>(m) * mc; ++q) {
            const double re = inspec[2 * q] * ker[2 * q] - inspec[2 * q + 1] * ker[2 * q + 1];
            const double im = inspec[2 * q] * ker[2 * q + 1] + inspec[2 * q + 1] * ker[2 * q];
            cb[q][0] = re * scale;
            cb[q][1] = im * scale;
        }
        fftw_execute_dft_c2r(pbw, cb, rb);
        std::vector<double> out(static_cast<size_t>(n) * n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                out[static_cast<size_t>(j) * n + i] = rb[static_cast<size_t>(j) * m + i];
        return out;
    }
};

SioWorkspace::SioWorkspace(double L, int n) : impl_(std::make_unique<Impl>(L, n)) {}
SioWorkspace::~SioWorkspace() = default;
int SioWorkspace::n() const { return impl_->n; }
double SioWorkspace::L() const { return impl_->L; }

namespace {

struct ComponentPlan {
    std::vector<Term> terms;
    std::vector<double> local;  // pointwise multiplier of f
};

// evaluates v and grad v on the grid and exposes the field registry
struct FieldRegistry {
    int n;
    std::array<std::vector<double>, 17> fields;

    FieldRegistry(const VelocityFieldModel& vm, double L, int n_) : n(n_) {
        const size_t nr = static_cast<size_t>(n) * n;
        for (auto& f : fields) f.resize(nr);
        const double h = 2.0 * L / n;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const Vec2 x{-L + (i + 0.5) * h, -L + (j + 0.5) * h};
                const size_t q = static_cast<size_t>(j) * n + i;
                const Vec2 vv = vm.v(x);
                const Mat2 gg = vm.grad_v(x);
                const double vc[2] = {vv.x, vv.y};
                fields[fid_V(0)][q] = vv.x;
                fields[fid_V(1)][q] = vv.y;
                fields[fid_VV(0, 0)][q] = vv.x * vv.x;
                fields[fid_VV(0, 1)][q] = vv.x * vv.y;
                fields[fid_VV(1, 1)][q] = vv.y * vv.y;
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) {
                        fields[fid_DV(a, b)][q] = mat(gg, a, b);
                        for (int c = 0; c < 2; ++c)
                            fields[fid_DVV(a, b, c)][q] = mat(gg, a, b) * vc[c];
                    }
            }
    }
    const std::vector<double>& get(int id) const { return fields[id]; }
};

std::array<ComponentPlan, 4> build_plans(const FieldRegistry& reg, SioWorkspace::Impl& ws,
                                         int order) {
    std::array<ComponentPlan, 4> plans;
    const size_t nr = reg.fields[0].size();
    const double inv2pi = 1.0 / kTwoPi;
    for (int al = 0; al < 2; ++al)
        for (int be = 0; be < 2; ++be) {
            ComponentPlan& plan = plans[al * 2 + be];
            plan.local.assign(nr, 0.0);
            if (order == 1) {
                for (int g = 0; g < 2; ++g) {
                    plan.terms.push_back({kid_A(al, be, g), -1, fid_V(g), -inv2pi});
                    plan.terms.push_back({kid_A(al, be, g), fid_V(g), -1, +inv2pi});
                    plan.terms.push_back({kid_P(al, g), fid_DV(g, be), -1, -inv2pi});
                    plan.terms.push_back({kid_P(g, be), -1, fid_DV(g, al), -inv2pi});
                }
                for (int g = 0; g < 2; ++g) {
                    const double Cb = boundary_constant_C(be, g);
                    for (size_t q = 0; q < nr; ++q)
                        plan.local[q] += Cb * reg.get(fid_DV(g, al))[q];
                    for (int r = 0; r < 2; ++r) {
                        const double C1 = boundary_constant_C1(al, r, be, g);
                        const double res = -inv2pi * ws.RA[al][be][g][r];
                        for (size_t q = 0; q < nr; ++q)
                            plan.local[q] += (C1 + res) * reg.get(fid_DV(g, r))[q];
                    }
                }
            } else {
                const int a2 = al, b2 = be;
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) {
                        plan.terms.push_back({kid_Q(a, b, a2, b2), -1, fid_VV(a, b), +inv2pi});
                        plan.terms.push_back({kid_Q(a, b, a2, b2), fid_V(b), fid_V(a), -inv2pi});
                        plan.terms.push_back({kid_Q(a, b, a2, b2), fid_V(a), fid_V(b), -inv2pi});
                        plan.terms.push_back({kid_Q(a, b, a2, b2), fid_VV(a, b), -1, +inv2pi});
                        plan.terms.push_back(
                            {kid_S(a, b, a2), fid_DV(a, b2), fid_V(b), +2.0 * inv2pi});
                        plan.terms.push_back(
                            {kid_S(a, b, a2), fid_DVV(a, b2, b), -1, -2.0 * inv2pi});
                        plan.terms.push_back(
                            {kid_S(a, b, b2), -1, fid_DVV(a, a2, b), +2.0 * inv2pi});
                        plan.terms.push_back(
                            {kid_S(a, b, b2), fid_V(b), fid_DV(a, a2), -2.0 * inv2pi});
                        plan.terms.push_back(
                            {kid_P(a, b), fid_DV(b, b2), fid_DV(a, a2), -2.0 * inv2pi});
                    }
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                        for (int g = 0; g < 2; ++g) {
                            for (int g2 = 0; g2 < 2; ++g2) {
                                const double C2 = boundary_constant_C2a(g, g2, b2, a, b, a2);
                                const double res = inv2pi * ws.RQ[a][b][a2][b2][g][g2];
                                for (size_t q = 0; q < nr; ++q)
                                    plan.local[q] += (C2 + res) * reg.get(fid_DV(a, g))[q] *
                                                     reg.get(fid_DV(b, g2))[q];
                            }
                            const double C2b = boundary_constant_C2b(g, b2, a, b);
                            const double res2 = 2.0 * inv2pi * ws.RS[a][b][a2][g];
                            const double res3 = 2.0 * inv2pi * ws.RS[a][b][b2][g];
                            for (size_t q = 0; q < nr; ++q) {
                                plan.local[q] += C2b * (reg.get(fid_DV(a, a2))[q] *
                                                            reg.get(fid_DV(b, g))[q] +
                                                        reg.get(fid_DV(b, a2))[q] *
                                                            reg.get(fid_DV(a, g))[q]);
                                plan.local[q] += res2 * reg.get(fid_DV(a, b2))[q] *
                                                 reg.get(fid_DV(b, g))[q];
                                plan.local[q] += res3 * reg.get(fid_DV(a, a2))[q] *
                                                 reg.get(fid_DV(b, g))[q];
                            }
                        }
            }
        }
    return plans;
}

}  // namespace

SioOutput sio_apply(SioWorkspace& ws, const VelocityFieldModel& v, const std::vector<double>& f,
                    int order) {
    if (order != 1 && order != 2) throw std::invalid_argument("sio_apply: order must be 1 or 2");
    SioWorkspace::Impl& impl = *ws.impl_;
    const int n = impl.n;
    if (f.size() != static_cast<size_t>(n) * n)
        throw std::invalid_argument("sio_apply: field size mismatch");
    FieldRegistry reg(v, impl.L, n);
    const std::array<ComponentPlan, 4> plans = build_plans(reg, impl, order);

    SioOutput out;
    out.n = n;
    std::map<int, std::vector<double>> prespec;  // pre-field id -> spectrum of pre*f
    auto spec_of = [&](int pre) -> const std::vector<double>& {
        auto it = prespec.find(pre);
        if (it != prespec.end()) return it->second;
        std::vector<double> in(f);
        if (pre >= 0) {
            const std::vector<double>& w = reg.get(pre);
            for (size_t q = 0; q < in.size(); ++q) in[q] *= w[q];
        }
        return prespec.emplace(pre, impl.fwd_spectrum(in)).first->second;
    };

    for (int comp = 0; comp < 4; ++comp) {
        const ComponentPlan& plan = plans[comp];
        std::vector<double> acc(f.size(), 0.0);
        for (const Term& t : plan.terms) {
            const std::vector<double> conv = impl.convolve(t.kid, spec_of(t.pre));
            if (t.post >= 0) {
                const std::vector<double>& w = reg.get(t.post);
                for (size_t q = 0; q < acc.size(); ++q) acc[q] += t.coeff * w[q] * conv[q];
            } else {
                for (size_t q = 0; q < acc.size(); ++q) acc[q] += t.coeff * conv[q];
            }
        }
        for (size_t q = 0; q < acc.size(); ++q) acc[q] += plan.local[q] * f[q];
        out.comp[comp] = std::move(acc);
    }
    return out;
}

namespace {

// adjoint of the assembled operator, for the power-iteration norm probe
std::vector<double> sio_adjoint(SioWorkspace::Impl& impl, const FieldRegistry& reg,
                                const std::array<ComponentPlan, 4>& plans,
                                const SioOutput& u) {
    const size_t nr = u.comp[0].size();
    std::vector<double> g(nr, 0.0);
    for (int comp = 0; comp < 4; ++comp) {
        const ComponentPlan& plan = plans[comp];
        for (const Term& t : plan.terms) {
            std::vector<double> in(u.comp[comp]);
            if (t.post >= 0) {
                const std::vector<double>& w = reg.get(t.post);
                for (size_t q = 0; q < nr; ++q) in[q] *= w[q];
            }
            const std::vector<double> conv = impl.convolve(t.kid, impl.fwd_spectrum(in));
            if (t.pre >= 0) {
                const std::vector<double>& w = reg.get(t.pre);
                for (size_t q = 0; q < nr; ++q) g[q] += t.coeff * w[q] * conv[q];
            } else {
                for (size_t q = 0; q < nr; ++q) g[q] += t.coeff * conv[q];
            }
        }
        for (size_t q = 0; q < nr; ++q) g[q] += plan.local[q] * u.comp[comp][q];
    }
    return g;
}

}  // namespace

OperatorNormProbe probe_operator_norm(double L, int n, const VelocityFieldModel& v, int order,
                                      int probes, int power_iters, std::uint64_t seed) {
    SioWorkspace ws(L, n);
    SioWorkspace::Impl& impl = *ws.impl_;
    FieldRegistry reg(v, L, n);
    const std::array<ComponentPlan, 4> plans = build_plans(reg, impl, order);
    const double h = 2.0 * L / n;
    const double area = h * h;

    auto l2 = [&](const std::vector<double>& f) {
        double s = 0.0;
        for (double x : f) s += x * x;
        return std::sqrt(s * area);
    };
    auto out_l2 = [&](const SioOutput& o) {
        double s = 0.0;
        for (const auto& c : o.comp)
            for (double x : c) s += x * x;
        return std::sqrt(s * area);
    };
    auto apply_fwd = [&](const std::vector<double>& f) {
        SioOutput out;
        out.n = n;
        std::map<int, std::vector<double>> prespec;
        auto spec_of = [&](int pre) -> const std::vector<double>& {
            auto it = prespec.find(pre);
            if (it != prespec.end()) return it->second;
            std::vector<double> in(f);
            if (pre >= 0) {
                const std::vector<double>& w = reg.get(pre);
                for (size_t q = 0; q < in.size(); ++q) in[q] *= w[q];
            }
            return prespec.emplace(pre, impl.fwd_spectrum(in)).first->second;
        };
        for (int comp = 0; comp < 4; ++comp) {
            std::vector<double> acc(f.size(), 0.0);
            for (const Term& t : plans[comp].terms) {
                const std::vector<double> conv = impl.convolve(t.kid, spec_of(t.pre));
                if (t.post >= 0) {
                    const std::vector<double>& w = reg.get(t.post);
                    for (size_t q = 0; q < acc.size(); ++q) acc[q] += t.coeff * w[q] * conv[q];
                } else {
                    for (size_t q = 0; q < acc.size(); ++q) acc[q] += t.coeff * conv[q];
                }
            }
            for (size_t q = 0; q < acc.size(); ++q) acc[q] += plans[comp].local[q] * f[q];
            out.comp[comp] = std::move(acc);
        }
        return out;
    };

    auto random_probe = [&](std::uint64_t id) {
        std::vector<double> f(static_cast<size_t>(n) * n);
        const double sig = 0.25 * L;
        struct ModeSpec {
            Vec2 k;
            double phase, amp;
        };
        std::vector<ModeSpec> ms(5);
        for (int j = 0; j < 5; ++j) {
            ms[j].k = {-3.0 + 6.0 * BrownianPath::uniform01(seed, id, 10 + 3 * j),
                       -3.0 + 6.0 * BrownianPath::uniform01(seed, id, 11 + 3 * j)};
            ms[j].phase = kTwoPi * BrownianPath::uniform01(seed, id, 12 + 3 * j);
            ms[j].amp = 0.2 + BrownianPath::uniform01(seed, id, 13 + 3 * j);
        }
        for (int jj = 0; jj < n; ++jj)
            for (int ii = 0; ii < n; ++ii) {
                const Vec2 x{-L + (ii + 0.5) * h, -L + (jj + 0.5) * h};
                double val = 0.0;
                for (const ModeSpec& mspec : ms)
                    val += mspec.amp * std::cos(mspec.k.dot(x) + mspec.phase);
                f[static_cast<size_t>(jj) * n + ii] = val * std::exp(-x.norm2() / (2 * sig * sig));
            }
        const double nrm = l2(f);
        for (double& x : f) x /= nrm;
        return f;
    };

    OperatorNormProbe rep;
    rep.order = order;
    rep.grid_n = n;
    rep.probes = probes;
    std::vector<double> best;
    double best_val = 0.0;
    for (int p = 0; p < probes; ++p) {
        std::vector<double> f = random_probe(p);
        const double val = out_l2(apply_fwd(f));
        if (val > best_val) {
            best_val = val;
            best = std::move(f);
        }
    }
    std::vector<double> g = best;
    for (int it = 0; it < power_iters; ++it) {
        const SioOutput Tg = apply_fwd(g);
        g = sio_adjoint(impl, reg, plans, Tg);
        const double nrm = l2(g);
        if (nrm == 0.0) break;
        for (double& x : g) x /= nrm;
        best_val = std::max(best_val, out_l2(apply_fwd(g)));
    }
    rep.norm_estimate = best_val;
    const double denom = (order == 1) ? v.lip : v.lip * v.lip;
    rep.fitted_C = denom > 0.0 ? best_val / denom : 0.0;
    return rep;
}

void write_probe_report_json(const std::vector<OperatorNormProbe>& probes,
                             const std::string& path) {
    std::ofstream f(path);
    f << "[\n";
    for (size_t i = 0; i < probes.size(); ++i) {
        const OperatorNormProbe& p = probes[i];
        f << "  {\"order\": " << p.order << ", \"grid_n\": " << p.grid_n
          << ", \"norm_estimate\": " << p.norm_estimate << ", \"fitted_C\": " << p.fitted_C
          << ", \"probes\": " << p.probes << "}" << (i + 1 < probes.size() ? "," : "") << "\n";
    }
    f << "]\n";
}

}  // namespace forms
}  // namespace vortexmf
