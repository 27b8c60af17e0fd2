#include "vortexmf/free_space.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>

#include "vortexmf/coulomb.hpp"
#include "vortexmf/detail/fftw_guard.hpp"

namespace vortexmf {
namespace free_space {

using coulomb::kTwoPi;

// Zero-padded (factor 2) circular convolution makes the linear free-space
// convolution exact on the core box for the sampled kernels.
struct PotentialTable::Impl {
    int n, m, mc;
    double L, h;
    double* rbuf;
    fftw_complex* cbuf;
    fftw_plan fwd, bwd;
    std::vector<std::vector<double>> khat;  // spectra of g, gx, gy kernels

    Impl(double L_, int n_) : n(n_), m(2 * n_), mc(2 * n_ / 2 + 1), L(L_), h(2.0 * L_ / n_) {
        {
            std::lock_guard<std::mutex> lock(detail::fftw_mutex());
            rbuf = fftw_alloc_real(static_cast<size_t>(m) * m);
            cbuf = fftw_alloc_complex(static_cast<size_t>(m) * mc);
            fwd = fftw_plan_dft_r2c_2d(m, m, rbuf, cbuf, FFTW_MEASURE);
            bwd = fftw_plan_dft_c2r_2d(m, m, cbuf, rbuf, FFTW_MEASURE);
        }
        khat.resize(6);  // g, gx, gy stored as interleaved re/im pairs

        build_kernel(0, [this](int oi, int oj) {
            if (oi == 0 && oj == 0) return coulomb::disc_mean_g(h / std::sqrt(M_PI));
            return coulomb::g({oi * h, oj * h});
        });
        build_kernel(1, [this](int oi, int oj) { return grad_entry(oi, oj, 0); });
        build_kernel(2, [this](int oi, int oj) { return grad_entry(oi, oj, 1); });
    }

    double grad_entry(int oi, int oj, int comp) {
        if (oi == 0 && oj == 0) return 0.0;  // symmetric disc integral vanishes
        if (std::abs(oi) <= 2 && std::abs(oj) <= 2) {
            const Vec2 v = coulomb::integral_grad_g_rect((oi - 0.5) * h, (oi + 0.5) * h,
                                                         (oj - 0.5) * h, (oj + 0.5) * h);
            return (comp == 0 ? v.x : v.y) / (h * h);
        }
        const Vec2 z{oi * h, oj * h};
        const Vec2 v = coulomb::grad_g_trunc(z, 0.0);
        return comp == 0 ? v.x : v.y;
    }

    template <typename F>
    void build_kernel(int slot, F&& eval) {
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i) {
                const int oi = (i <= m / 2) ? i : i - m;
                const int oj = (j <= m / 2) ? j : j - m;
                rbuf[static_cast<size_t>(j) * m + i] = eval(oi, oj);
            }
        fftw_execute(fwd);
        std::vector<double> spec(2 * static_cast<size_t>(m) * mc);
        for (size_t q = 0; q < static_cast<size_t>(m) * mc; ++q) {
            spec[2 * q] = cbuf[q][0];
            spec[2 * q + 1] = cbuf[q][1];
        }
        khat[slot] = std::move(spec);
    }

    ~Impl() {
        std::lock_guard<std::mutex> lock(detail::fftw_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
        fftw_free(rbuf);
        fftw_free(cbuf);
    }

    // executes on per-call buffers, so concurrent callers are safe
    std::vector<double> convolve(const VorticityGrid& mu, int slot) const {
        if (mu.n != n || mu.L != L)
            throw std::invalid_argument("PotentialTable: grid geometry mismatch");
        const double area = h * h;
        double* rb;
        fftw_complex* cb;
        {
            std::lock_guard<std::mutex> lock(detail::fftw_mutex());
            rb = fftw_alloc_real(static_cast<size_t>(m) * m);
            cb = fftw_alloc_complex(static_cast<size_t>(m) * mc);
        }
        std::memset(rb, 0, sizeof(double) * m * m);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                rb[static_cast<size_t>(j) * m + i] = mu.at(i, j) * area;
        fftw_execute_dft_r2c(fwd, rb, cb);
        const std::vector<double>& kh = khat[slot];
        const double scale = 1.0 / (static_cast<double>(m) * m);
        for (size_t q = 0; q < static_cast<size_t>(m) * mc; ++q) {
            const double re = cb[q][0] * kh[2 * q] - cb[q][1] * kh[2 * q + 1];
            const double im = cb[q][0] * kh[2 * q + 1] + cb[q][1] * kh[2 * q];
            cb[q][0] = re * scale;
            cb[q][1] = im * scale;
        }
        fftw_execute_dft_c2r(bwd, cb, rb);
        std::vector<double> out(static_cast<size_t>(n) * n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                out[static_cast<size_t>(j) * n + i] = rb[static_cast<size_t>(j) * m + i];
        {
            std::lock_guard<std::mutex> lock(detail::fftw_mutex());
            fftw_free(rb);
            fftw_free(cb);
        }
        return out;
    }
};

PotentialTable::PotentialTable(double L, int n) : impl_(std::make_unique<Impl>(L, n)) {}
PotentialTable::~PotentialTable() = default;

std::vector<double> PotentialTable::potential(const VorticityGrid& mu) const {
    return impl_->convolve(mu, 0);
}

void PotentialTable::gradient(const VorticityGrid& mu, std::vector<double>& gx,
                              std::vector<double>& gy) const {
    gx = impl_->convolve(mu, 1);
    gy = impl_->convolve(mu, 2);
}

double potential_at(const VorticityGrid& mu, const Vec2& p) {
    const int n = mu.n;
    const double h = mu.h();
    const double area = h * h;
    const int pi = static_cast<int>(std::floor((p.x + mu.L) / h));
    const int pj = static_cast<int>(std::floor((p.y + mu.L) / h));
    double acc = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double v = mu.at(i, j);
            if (v == 0.0) continue;
            if (std::abs(i - pi) <= 2 && std::abs(j - pj) <= 2) {
                if (i == pi && j == pj) {
                    acc += v * area * coulomb::disc_mean_g(h / std::sqrt(M_PI));
                } else {
                    const Vec2 yc = mu.cell_center(i, j);
                    acc += v * coulomb::integral_g_rect(p.x - (yc.x + 0.5 * h),
                                                        p.x - (yc.x - 0.5 * h),
                                                        p.y - (yc.y + 0.5 * h),
                                                        p.y - (yc.y - 0.5 * h));
                }
            } else {
                acc += v * area * coulomb::g(p - mu.cell_center(i, j));
            }
        }
    return acc;
}

Vec2 potential_gradient_at(const VorticityGrid& mu, const Vec2& p) {
    const int n = mu.n;
    const double h = mu.h();
    const double area = h * h;
    const int pi = static_cast<int>(std::floor((p.x + mu.L) / h));
    const int pj = static_cast<int>(std::floor((p.y + mu.L) / h));
    Vec2 acc;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double v = mu.at(i, j);
            if (v == 0.0) continue;
            if (std::abs(i - pi) <= 2 && std::abs(j - pj) <= 2) {
                if (i == pi && j == pj) continue;
                const Vec2 yc = mu.cell_center(i, j);
                acc += v * coulomb::integral_grad_g_rect(p.x - (yc.x + 0.5 * h),
                                                         p.x - (yc.x - 0.5 * h),
                                                         p.y - (yc.y + 0.5 * h),
                                                         p.y - (yc.y - 0.5 * h));
            } else {
                acc += v * area * coulomb::grad_g_trunc(p - mu.cell_center(i, j), 0.0);
            }
        }
    return acc;
}

// --- multipole ------------------------------------------------------------

double Multipole::potential(const Vec2& zv) const {
    const std::complex<double> z(zv.x, zv.y);
    const double r = std::abs(z);
    double val = -total_mass * std::log(r) / kTwoPi;
    std::complex<double> zinv = 1.0 / z, zp = zinv;
    for (size_t m = 1; m <= a.size(); ++m) {
        val += std::real(a[m - 1] * zp) / (kTwoPi * static_cast<double>(m));
        zp *= zinv;
    }
    return val;
}

Vec2 Multipole::gradient(const Vec2& zv) const {
    // H = Re F(z) with F analytic: grad H = (Re F', -Im F').
    const std::complex<double> z(zv.x, zv.y);
    const std::complex<double> zinv = 1.0 / z;
    std::complex<double> Fp = -total_mass / kTwoPi * zinv;
    std::complex<double> zp = zinv * zinv;
    for (size_t m = 1; m <= a.size(); ++m) {
        Fp -= a[m - 1] * zp / kTwoPi;
        zp *= zinv;
    }
    return {std::real(Fp), -std::imag(Fp)};
}

double Multipole::tail_energy(double R) const {
    if (std::abs(total_mass) > 1e-9)
        throw std::invalid_argument("Multipole::tail_energy needs zero total mass");
    double s = 0.0;
    double R2m = R * R;
    for (size_t m = 1; m <= a.size(); ++m) {
        s += std::norm(a[m - 1]) / (static_cast<double>(m) * R2m);
        R2m *= R * R;
    }
    return s / (2.0 * kTwoPi);
}

Multipole multipole_particles(const std::vector<Vec2>& xs, int order) {
    Multipole mp;
    mp.total_mass = static_cast<double>(xs.size());
    mp.a.assign(order, {0.0, 0.0});
    for (const Vec2& x : xs) {
        const std::complex<double> w(x.x, x.y);
        std::complex<double> wp = w;
        for (int m = 1; m <= order; ++m) {
            mp.a[m - 1] += wp;
            wp *= w;
        }
    }
    return mp;
}

Multipole multipole_grid(const VorticityGrid& mu, double weight, int order) {
    Multipole mp;
    mp.a.assign(order, {0.0, 0.0});
    const double area = mu.cell_area();
    // high-order moments amplify far cells enormously, so skip the ones whose
    // values are numerically irrelevant (spectral-ringing debris)
    double mx = 0.0;
    for (double v : mu.values) mx = std::max(mx, std::abs(v));
    const double floor = 1e-12 * mx;
    for (int j = 0; j < mu.n; ++j)
        for (int i = 0; i < mu.n; ++i) {
            const double m0 = weight * mu.at(i, j) * area;
            if (std::abs(mu.at(i, j)) <= floor) continue;
            mp.total_mass += m0;
            const Vec2 c = mu.cell_center(i, j);
            const std::complex<double> w(c.x, c.y);
            std::complex<double> wp = w;
            for (int m = 1; m <= order; ++m) {
                mp.a[m - 1] += m0 * wp;
                wp *= w;
            }
        }
    return mp;
}

Multipole multipole_combined(const std::vector<Vec2>& xs, const VorticityGrid& mu,
                             double grid_weight, int order) {
    Multipole p = multipole_particles(xs, order);
    const Multipole g = multipole_grid(mu, grid_weight, order);
    p.total_mass += g.total_mass;
    for (int m = 0; m < order; ++m) p.a[m] += g.a[m];
    return p;
}

}  // namespace free_space
}  // namespace vortexmf
