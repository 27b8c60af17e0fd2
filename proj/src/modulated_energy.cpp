#include "vortexmf/modulated_energy.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>

#include "vortexmf/detail/fftw_guard.hpp"
#include "vortexmf/free_space.hpp"

namespace vortexmf {
namespace detail {
std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

namespace energy {

using coulomb::kTwoPi;

namespace {

// One shared convolution table per (L, n); PotentialTable executions are
// guarded internally by FFTW's new-array interface on caller buffers.
const free_space::PotentialTable& shared_table(double L, int n) {
    static std::mutex m;
    static std::map<std::pair<double, int>, std::unique_ptr<free_space::PotentialTable>> cache;
    std::lock_guard<std::mutex> lock(m);
    auto& slot = cache[{L, n}];
    if (!slot) slot = std::make_unique<free_space::PotentialTable>(L, n);
    return *slot;
}

// int g(p - y) mu(y) dy with the near-cell rules shared by every consumer:
// equal-area disc mean for the cell containing p, exact rectangle integrals
// within two cells, midpoint beyond.
double px_value(const VorticityGrid& mu, const Vec2& p) { return free_space::potential_at(mu, p); }

double gauss12_g_eta(const VorticityGrid& mu, int ci, int cj, const Vec2& xj, double eta) {
    // cell average of g_eta over a cell straddling the truncation circle
    static const double gx[12] = {-0.9815606342467192, -0.9041172563704749, -0.7699026741943047,
                                  -0.5873179542866175, -0.3678314989981802, -0.1252334085114689,
                                  0.1252334085114689,  0.3678314989981802,  0.5873179542866175,
                                  0.7699026741943047,  0.9041172563704749,  0.9815606342467192};
    static const double gw[12] = {0.0471753363865118, 0.1069393259953184, 0.1600783285433462,
                                  0.2031674267230659, 0.2334925365383548, 0.2491470458134028,
                                  0.2491470458134028, 0.2334925365383548, 0.2031674267230659,
                                  0.1600783285433462, 0.1069393259953184, 0.0471753363865118};
    const double h = mu.h();
    const Vec2 c = mu.cell_center(ci, cj);
    double acc = 0.0;
    for (int a = 0; a < 12; ++a)
        for (int b = 0; b < 12; ++b) {
            const Vec2 y{c.x + 0.5 * h * gx[a], c.y + 0.5 * h * gx[b]};
            acc += gw[a] * gw[b] * coulomb::g_trunc(y - xj, eta);
        }
    return acc * 0.25;  // mean over the cell
}

}  // namespace

EnergyReport modulated_energy(const VortexEnsemble& ensemble, const VorticityGrid* grid) {
    const int N = ensemble.size();
    if (N < 1) throw std::invalid_argument("modulated_energy: empty ensemble");
    EnergyReport rep;
    rep.min_dist = (N > 1) ? ensemble.min_pair_distance()
                           : std::numeric_limits<double>::infinity();
    if (N > 1 && rep.min_dist == 0.0)
        throw std::invalid_argument("modulated_energy: coincident vortex pair");

    double pp = 0.0;
#pragma omp parallel for reduction(+ : pp) schedule(static)
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            if (j != i) pp += coulomb::g(ensemble.positions[i] - ensemble.positions[j]);
    rep.term_pp = pp / (static_cast<double>(N) * N);

    if (grid != nullptr) {
        if (grid->support_radius() > 0.95 * grid->L)
            throw std::runtime_error("modulated_energy: support too close to the box boundary");
        double px = 0.0;
#pragma omp parallel for reduction(+ : px) schedule(static)
        for (int i = 0; i < N; ++i) px += px_value(*grid, ensemble.positions[i]);
        rep.term_px = px / N;

        const std::vector<double> phi = shared_table(grid->L, grid->n).potential(*grid);
        double xx = 0.0;
        const double area = grid->cell_area();
        for (size_t q = 0; q < phi.size(); ++q) xx += phi[q] * grid->values[q] * area;
        rep.term_xx = xx;
    }
    rep.F_avg = rep.term_pp - 2.0 * rep.term_px + rep.term_xx;
    return rep;
}

coulomb::TruncationVector r_vec(const VortexEnsemble& ensemble, double eps1) {
    if (eps1 <= 0.0 || eps1 >= 1.0) throw std::invalid_argument("r_vec: eps1 must lie in (0,1)");
    const int N = ensemble.size();
    coulomb::TruncationVector tv;
    tv.eta.resize(N);
    for (int i = 0; i < N; ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        for (int j = 0; j < N; ++j)
            if (j != i) dmin = std::min(dmin, (ensemble.positions[i] - ensemble.positions[j]).norm());
        tv.eta[i] = std::min(0.25 * dmin, eps1);
    }
    return tv;
}

long close_pairs(const VortexEnsemble& ensemble, double eps3) {
    if (eps3 <= 0.0) throw std::invalid_argument("close_pairs: eps3 must be positive");
    const int N = ensemble.size();
    long count = 0;
    const double e2 = eps3 * eps3;
    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j)
            if ((ensemble.positions[i] - ensemble.positions[j]).norm2() <= e2) count += 2;
    return count;
}

// --- smeared energy ---------------------------------------------------------

namespace {

// edge distance from an interior point to the box boundary along direction
// theta, for the polar self-energy integral
double box_edge_radius(const Vec2& p, double L, double ct, double st) {
    double r = std::numeric_limits<double>::infinity();
    if (ct > 0) r = std::min(r, (L - p.x) / ct);
    if (ct < 0) r = std::min(r, (-L - p.x) / ct);
    if (st > 0) r = std::min(r, (L - p.y) / st);
    if (st < 0) r = std::min(r, (-L - p.y) / st);
    return r;
}

struct GaussRule {
    std::vector<double> x, w;  // nodes on [-1, 1]
};

GaussRule gauss_legendre(int n) {
    GaussRule r;
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
}

}  // namespace

SmearedResult smeared_energy(const VortexEnsemble& ensemble,
                             const coulomb::TruncationVector& etas, const VorticityGrid& grid,
                             const SmearedOptions& opt) {
    const int N = ensemble.size();
    if (static_cast<int>(etas.eta.size()) != N)
        throw std::invalid_argument("smeared_energy: eta vector length mismatch");
    for (double e : etas.eta)
        if (!(e > 0.0)) throw std::invalid_argument("smeared_energy: all eta must be positive");
    const double L = grid.L;
    for (int i = 0; i < N; ++i) {
        const Vec2& x = ensemble.positions[i];
        if (std::max(std::abs(x.x), std::abs(x.y)) + etas.eta[i] >= L)
            throw std::runtime_error("smeared_energy: smearing circle reaches the box boundary");
    }

    SmearedResult res;
    const double Nw = static_cast<double>(N);
    const int n = grid.n;
    const double h = grid.h();
    const double area = h * h;
    const double r_e = h / std::sqrt(M_PI);

    // Green identity on the box: int_box |grad H|^2
    //   = oint_bdry H dH/dnu + sum_i avg_i(H) - N int_box H dmu,
    // then the exterior energy from the multipole expansion.

    // phi = g * mu at cells (shared discrete object with modulated_energy)
    const std::vector<double> phi = shared_table(L, n).potential(grid);

    // px_i and the per-particle self-cell density (for the eta^2 correction)
    std::vector<double> px(N), mu_at(N);
    for (int i = 0; i < N; ++i) {
        px[i] = px_value(grid, ensemble.positions[i]);
        const int ci = std::clamp(static_cast<int>(std::floor((ensemble.positions[i].x + L) / h)), 0, n - 1);
        const int cj = std::clamp(static_cast<int>(std::floor((ensemble.positions[i].y + L) / h)), 0, n - 1);
        mu_at[i] = grid.at(ci, cj);
    }

    // circle averages of H; pair part is g(d_ij) for disjoint circles, else
    // M-node quadrature on the circle
    double sum_avg = 0.0;
    for (int i = 0; i < N; ++i) {
        double avg = coulomb::g_tilde(etas.eta[i]);
        for (int j = 0; j < N; ++j) {
            if (j == i) continue;
            const double d = (ensemble.positions[i] - ensemble.positions[j]).norm();
            if (d >= etas.eta[i] + etas.eta[j]) {
                avg += coulomb::g_tilde(std::max(d, etas.eta[i]));
            } else {
                res.overlapping = true;
                const coulomb::SmearedDelta circ =
                    coulomb::smeared_delta(ensemble.positions[i], etas.eta[i], opt.circle_nodes);
                avg += coulomb::integrate(circ, [&](const Vec2& z) {
                    return coulomb::g_trunc(z - ensemble.positions[j], etas.eta[j]);
                });
            }
        }
        // avg over the circle of phi equals px_i plus the truncation deficit
        const double dc = -0.25 * etas.eta[i] * etas.eta[i] * mu_at[i];
        avg -= Nw * (px[i] + dc);
        sum_avg += avg;
    }

    // N int_box H dmu with H at cell centers
    std::vector<double> Hc(static_cast<size_t>(n) * n, 0.0);
    for (size_t q = 0; q < Hc.size(); ++q) Hc[q] = -Nw * phi[q];
#pragma omp parallel for schedule(dynamic)
    for (int j = 0; j < N; ++j) {
        const Vec2 xj = ensemble.positions[j];
        const double eta = etas.eta[j];
        const int cj_i = std::clamp(static_cast<int>(std::floor((xj.x + L) / h)), 0, n - 1);
        const int cj_j = std::clamp(static_cast<int>(std::floor((xj.y + L) / h)), 0, n - 1);
        std::vector<double> col(static_cast<size_t>(n) * n);
        for (int cy = 0; cy < n; ++cy)
            for (int cx = 0; cx < n; ++cx) {
                const Vec2 yc = grid.cell_center(cx, cy);
                double val;
                if (cx == cj_i && cy == cj_j) {
                    // disc mean of g_eta on the equal-area disc
                    if (eta >= r_e)
                        val = coulomb::g_tilde(eta);
                    else
                        val = coulomb::disc_mean_g(r_e) - eta * eta / (4.0 * area);
                } else if (std::abs(cx - cj_i) <= 2 && std::abs(cy - cj_j) <= 2) {
                    const double celldist =
                        std::hypot(std::max(0.0, std::abs(yc.x - xj.x) - 0.5 * h),
                                   std::max(0.0, std::abs(yc.y - xj.y) - 0.5 * h));
                    if (celldist >= eta) {
                        val = coulomb::integral_g_rect(xj.x - (yc.x + 0.5 * h),
                                                       xj.x - (yc.x - 0.5 * h),
                                                       xj.y - (yc.y + 0.5 * h),
                                                       xj.y - (yc.y - 0.5 * h)) /
                              area;
                    } else {
                        val = gauss12_g_eta(grid, cx, cy, xj, eta);
                    }
                } else {
                    val = coulomb::g_trunc(yc - xj, eta);
                }
                col[static_cast<size_t>(cy) * n + cx] = val;
            }
#pragma omp critical
        for (size_t q = 0; q < col.size(); ++q) Hc[q] += col[q];
    }
    double int_H_mu = 0.0;
    for (size_t q = 0; q < Hc.size(); ++q) int_H_mu += Hc[q] * grid.values[q] * area;

    // boundary flux oint H dH/dnu; grid potential by multipole (support is in
    // the box core), particle potentials exact
    const free_space::Multipole mp_grid = free_space::multipole_grid(grid, 1.0, opt.multipole_order);
    const GaussRule gr = gauss_legendre(16);
    const int panels = std::max(4, opt.boundary_nodes_per_edge / 16);
    double flux = 0.0;
    for (int edge = 0; edge < 4; ++edge) {
        // edge 0: x = +L, nu = +x; 1: x = -L; 2: y = +L; 3: y = -L
        for (int pnl = 0; pnl < panels; ++pnl) {
            const double a = -L + 2.0 * L * pnl / panels;
            const double b = -L + 2.0 * L * (pnl + 1) / panels;
            for (int q = 0; q < 16; ++q) {
                const double tq = 0.5 * (a + b) + 0.5 * (b - a) * gr.x[q];
                const double wq = 0.5 * (b - a) * gr.w[q];
                Vec2 z, nu;
                switch (edge) {
                    case 0: z = {L, tq}; nu = {1, 0}; break;
                    case 1: z = {-L, tq}; nu = {-1, 0}; break;
                    case 2: z = {tq, L}; nu = {0, 1}; break;
                    default: z = {tq, -L}; nu = {0, -1}; break;
                }
                double Hval = -Nw * mp_grid.potential(z);
                Vec2 Hgrad = -Nw * mp_grid.gradient(z);
                for (int i = 0; i < N; ++i) {
                    const Vec2 d = z - ensemble.positions[i];
                    Hval += coulomb::g_trunc(d, etas.eta[i]);
                    Hgrad += coulomb::grad_g_trunc(d, etas.eta[i]);
                }
                flux += wq * Hval * Hgrad.dot(nu);
            }
        }
    }

    // exterior energy: polar quadrature between the box edge and the
    // circumscribed circle, then the analytic series tail
    std::vector<Vec2> xs = ensemble.positions;
    const free_space::Multipole mp_all =
        free_space::multipole_combined(xs, grid, -Nw, opt.multipole_order);
    const double Rout = std::sqrt(2.0) * L;
    double annulus = 0.0;
    const GaussRule gth = gauss_legendre(48);
    const GaussRule grad_rule = gauss_legendre(24);
    for (int oct = 0; oct < 8; ++oct) {
        const double th0 = -M_PI + oct * M_PI / 4.0;
        const double th1 = th0 + M_PI / 4.0;
        for (int qt = 0; qt < 48; ++qt) {
            const double th = 0.5 * (th0 + th1) + 0.5 * (th1 - th0) * gth.x[qt];
            const double wth = 0.5 * (th1 - th0) * gth.w[qt];
            const double ct = std::cos(th), st = std::sin(th);
            const double redge = L / std::max(std::abs(ct), std::abs(st));
            for (int qr = 0; qr < 24; ++qr) {
                const double r = 0.5 * (redge + Rout) + 0.5 * (Rout - redge) * grad_rule.x[qr];
                const double wr = 0.5 * (Rout - redge) * grad_rule.w[qr];
                const Vec2 z{r * ct, r * st};
                annulus += wth * wr * r * mp_all.gradient(z).norm2();
            }
        }
    }
    const double tail = mp_all.tail_energy(Rout);

    res.value = flux + sum_avg - Nw * int_H_mu + annulus + tail;
    return res;
}

// --- Sobolev distance -------------------------------------------------------

double sobolev_distance(const VortexEnsemble& ensemble, const VorticityGrid& grid, double s) {
    if (s >= -1.0)
        throw std::invalid_argument("sobolev_distance: s must be below -1");
    const int N = ensemble.size();
    const int n = grid.n;
    const int m = 2 * n;  // padded box, factor 2
    const int mc = m / 2 + 1;
    const double L = grid.L;
    const double h = grid.h();
    const double dk = M_PI / (2.0 * L);

    // grid spectral coefficients on the padded box
    double* rbuf;
    fftw_complex* cbuf;
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(detail::fftw_mutex());
        rbuf = fftw_alloc_real(static_cast<size_t>(m) * m);
        cbuf = fftw_alloc_complex(static_cast<size_t>(m) * mc);
        plan = fftw_plan_dft_r2c_2d(m, m, rbuf, cbuf, FFTW_ESTIMATE);
    }
    std::memset(rbuf, 0, sizeof(double) * m * m);
    const double area = grid.cell_area();
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            rbuf[static_cast<size_t>(j + n / 2) * m + (i + n / 2)] = grid.at(i, j) * area;
    fftw_execute(plan);

    // xi_hat(k_m) = twiddle * DFT, with cell centers at -2L + (i'+1/2) h
    // and k = dk * mtilde; the particle part carries exact phases built by
    // per-particle power recurrences (no trig in the hot loop).
    std::vector<std::complex<double>> ex(static_cast<size_t>(N) * mc);
    std::vector<std::complex<double>> ey(static_cast<size_t>(N) * m);
    for (int p = 0; p < N; ++p) {
        const std::complex<double> wx = std::polar(1.0, -dk * ensemble.positions[p].x);
        const std::complex<double> wy = std::polar(1.0, -dk * ensemble.positions[p].y);
        std::complex<double> acc(1.0, 0.0);
        for (int i = 0; i < mc; ++i) {
            ex[static_cast<size_t>(p) * mc + i] = acc;
            acc *= wx;
        }
        acc = {1.0, 0.0};
        std::vector<std::complex<double>> pos(m / 2 + 1);
        for (int j = 0; j <= m / 2; ++j) {
            pos[j] = acc;
            acc *= wy;
        }
        for (int j = 0; j < m; ++j) {
            const int mj = (j <= m / 2) ? j : j - m;
            ey[static_cast<size_t>(p) * m + j] = (mj >= 0) ? pos[mj] : std::conj(pos[-mj]);
        }
    }

    double total = 0.0;
#pragma omp parallel for reduction(+ : total) schedule(static)
    for (int j = 0; j < m; ++j) {
        const int mj = (j <= m / 2) ? j : j - m;
        const double ky = dk * mj;
        for (int i = 0; i < mc; ++i) {
            const double kx = dk * i;
            const size_t q = static_cast<size_t>(j) * mc + i;
            // twiddle e^{i k 2L} e^{-i k h/2} per axis
            const double phx = kx * (2.0 * L) - kx * 0.5 * h;
            const double phy = ky * (2.0 * L) - ky * 0.5 * h;
            const std::complex<double> tw = std::polar(1.0, phx + phy);
            std::complex<double> xi_hat =
                tw * std::complex<double>(cbuf[q][0], cbuf[q][1]);

            std::complex<double> part(0.0, 0.0);
            for (int p = 0; p < N; ++p)
                part += ex[static_cast<size_t>(p) * mc + i] * ey[static_cast<size_t>(p) * m + j];
            part /= static_cast<double>(N);
            const double k2 = kx * kx + ky * ky;
            const double w = std::pow(1.0 + k2, s);
            // r2c stores half the spectrum; double-count the interior columns
            const double mult = (i == 0 || i == m / 2) ? 1.0 : 2.0;
            total += mult * w * std::norm(part - xi_hat);
        }
    }
    {
        std::lock_guard<std::mutex> lock(detail::fftw_mutex());
        fftw_destroy_plan(plan);
        fftw_free(rbuf);
        fftw_free(cbuf);
    }
    return std::sqrt(total * dk * dk);
}

EnergyReport full_report(const VortexEnsemble& ensemble, const VorticityGrid& grid, double eps1,
                         double eps3, double s, bool with_smeared, bool with_hs) {
    EnergyReport rep = modulated_energy(ensemble, &grid);
    rep.r_vec = r_vec(ensemble, eps1);
    rep.close_pairs = close_pairs(ensemble, eps3);
    if (with_hs) rep.hs_distance = sobolev_distance(ensemble, grid, s);
    if (with_smeared) {
        double sum_gt = 0.0;
        for (double e : rep.r_vec.eta) sum_gt += coulomb::g_tilde(e);
        rep.smeared = smeared_energy(ensemble, rep.r_vec, grid).value - sum_gt;
    }
    rep.t = grid.t;
    return rep;
}

}  // namespace energy
}  // namespace vortexmf
