#include "vortexmf/coulomb.hpp"

#include <cmath>
#include <stdexcept>

#include "vortexmf/euler_pde.hpp"
#include "vortexmf/vortex_sde.hpp"

namespace vortexmf {
namespace coulomb {

double g(const Vec2& x) {
    const double r2 = x.norm2();
    if (r2 == 0.0) throw std::domain_error("coulomb::g: singular input x = 0");
    return -0.25 / M_PI * std::log(r2);  // -(1/2pi) ln|x|
}

double g_tilde(double r) {
    if (r <= 0.0) throw std::domain_error("coulomb::g_tilde: r must be positive");
    return -std::log(r) / kTwoPi;
}

double g_trunc(const Vec2& x, double eta) {
    if (eta <= 0.0) throw std::invalid_argument("coulomb::g_trunc: eta must be positive");
    const double r2 = x.norm2();
    if (r2 >= eta * eta) return -0.25 / M_PI * std::log(r2);
    return g_tilde(eta);
}

Vec2 grad_g_trunc(const Vec2& x, double eta) {
    if (eta < 0.0) throw std::invalid_argument("coulomb::grad_g_trunc: eta must be nonnegative");
    const double r2 = x.norm2();
    if (r2 < eta * eta) return {0.0, 0.0};
    if (r2 == 0.0) throw std::domain_error("coulomb::grad_g_trunc: singular input with eta = 0");
    const double f = -1.0 / (kTwoPi * r2);
    return {f * x.x, f * x.y};
}

Mat2 hess_g(const Vec2& x) {
    const double r2 = x.norm2();
    if (r2 == 0.0) throw std::domain_error("coulomb::hess_g: singular input x = 0");
    const double inv = 1.0 / (kTwoPi * r2);
    const double q = 2.0 / r2;
    return {-inv * (1.0 - q * x.x * x.x), -inv * (0.0 - q * x.x * x.y),
            -inv * (0.0 - q * x.y * x.x), -inv * (1.0 - q * x.y * x.y)};
}

SmearedDelta smeared_delta(const Vec2& center, double eta, int node_count) {
    if (eta <= 0.0) throw std::invalid_argument("smeared_delta: eta must be positive");
    if (node_count < 8) throw std::invalid_argument("smeared_delta: need at least 8 nodes");
    SmearedDelta d;
    d.center = center;
    d.eta = eta;
    d.node_count = node_count;
    d.nodes.resize(node_count);
    d.weights.assign(node_count, 1.0 / node_count);
    for (int m = 0; m < node_count; ++m) {
        const double phi = kTwoPi * m / node_count;
        d.nodes[m] = {center.x + eta * std::cos(phi), center.y + eta * std::sin(phi)};
    }
    return d;
}

namespace {

// Double antiderivative of ln sqrt(x^2+y^2): corner-evaluate to integrate
// over rectangles. Terms vanish continuously on the axes.
double corner_ln(double x, double y) {
    double v = 0.0;
    const double r2 = x * x + y * y;
    if (x != 0.0 && y != 0.0) v += x * y * std::log(r2) - 3.0 * x * y;
    if (x != 0.0) v += x * x * std::atan(y / x);
    if (y != 0.0) v += y * y * std::atan(x / y);
    return 0.5 * v;
}

// Double antiderivative of x/(x^2+y^2).
double corner_gx(double x, double y) {
    double v = 0.0;
    const double r2 = x * x + y * y;
    if (y != 0.0) v += 0.5 * y * std::log(r2) - y;
    if (x != 0.0) v += x * std::atan(y / x);
    return v;
}

double corner_eval(double (*f)(double, double), double x0, double x1, double y0, double y1) {
    return f(x1, y1) - f(x0, y1) - f(x1, y0) + f(x0, y0);
}

}  // namespace

double integral_g_rect(double x0, double x1, double y0, double y1) {
    return -corner_eval(corner_ln, x0, x1, y0, y1) / kTwoPi;
}

Vec2 integral_grad_g_rect(double x0, double x1, double y0, double y1) {
    // The y-component reuses corner_gx with the roles of x and y swapped.
    const double ix = corner_eval(corner_gx, x0, x1, y0, y1);
    const double iy = corner_eval(corner_gx, y0, y1, x0, x1);
    return {-ix / kTwoPi, -iy / kTwoPi};
}

double disc_mean_g(double r) { return g_tilde(r) + 1.0 / (2.0 * kTwoPi); }

std::vector<FieldSample> field_grad_H(const VortexEnsemble& ensemble,
                                      const TruncationVector& etas, const VorticityGrid* mu,
                                      const std::vector<Vec2>& points) {
    const int N = ensemble.size();
    if (static_cast<int>(etas.eta.size()) != N)
        throw std::invalid_argument("field_grad_H: eta vector length mismatch");
    std::vector<FieldSample> out(points.size());

#pragma omp parallel for schedule(static)
    for (long p = 0; p < static_cast<long>(points.size()); ++p) {
        const Vec2 z = points[p];
        FieldSample s;
        for (int i = 0; i < N; ++i) {
            const Vec2 d = z - ensemble.positions[i];
            if (d.norm2() <= etas.eta[i] * etas.eta[i]) s.inside_circle = true;
            s.grad_H += grad_g_trunc(d, etas.eta[i]);
        }
        if (mu != nullptr) {
            const int n = mu->n;
            const double h = mu->h();
            const double area = h * h;
            const double N_w = static_cast<double>(N);
            // cell index of the evaluation point
            const int pi = static_cast<int>(std::floor((z.x + mu->L) / h));
            const int pj = static_cast<int>(std::floor((z.y + mu->L) / h));
            Vec2 acc;
            for (int j = 0; j < n; ++j) {
                for (int i = 0; i < n; ++i) {
                    const double m = mu->at(i, j) * area;
                    if (m == 0.0) continue;
                    const Vec2 yc = mu->cell_center(i, j);
                    const Vec2 d = z - yc;
                    if (std::abs(i - pi) <= 2 && std::abs(j - pj) <= 2) {
                        if (i == pi && j == pj) continue;  // equal-area disc integral is zero
                        // exact integral of grad g over the cell, as a mean
                        const double cx0 = z.x - (yc.x + 0.5 * h), cx1 = z.x - (yc.x - 0.5 * h);
                        const double cy0 = z.y - (yc.y + 0.5 * h), cy1 = z.y - (yc.y - 0.5 * h);
                        acc += mu->at(i, j) * integral_grad_g_rect(cx0, cx1, cy0, cy1);
                    } else {
                        const double f = -1.0 / (kTwoPi * d.norm2());
                        acc += m * f * d;
                    }
                }
            }
            s.grad_H -= N_w * acc;
        }
        out[p] = s;
    }
    return out;
}

}  // namespace coulomb
}  // namespace vortexmf
