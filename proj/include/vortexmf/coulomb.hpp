#pragma once

#include <vector>

#include "vortexmf/geometry.hpp"

// 2D Coulomb potential g(x) = -(1/2pi) ln|x|, its truncation g_eta, the
// circle-smeared Dirac mass, and the field grad H built from a vortex
// configuration minus a background density.

namespace vortexmf {

struct VorticityGrid;  // euler_pde.hpp
struct VortexEnsemble; // vortex_sde.hpp

namespace coulomb {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// -(1/2pi) ln|x|. Throws std::domain_error at x = 0.
double g(const Vec2& x);

/// g as a function of radius: g_tilde(r) = -(1/2pi) ln r.
double g_tilde(double r);

/// Truncated potential: g(x) for |x| >= eta, g_tilde(eta) inside.
/// At |x| = eta exactly the outer branch applies (both agree).
double g_trunc(const Vec2& x, double eta);

/// Gradient of g_trunc: -x/(2pi|x|^2) on |x| >= eta, zero inside.
/// eta = 0 gives the untruncated gradient; then x = 0 is rejected.
Vec2 grad_g_trunc(const Vec2& x, double eta);

/// Hessian of g at x != 0: -(1/2pi)(I/|x|^2 - 2 x(x)/|x|^4).
Mat2 hess_g(const Vec2& x);

// Uniform quadrature of the probability measure on the circle
// |y - center| = eta: node_count nodes, weights summing to 1.
struct SmearedDelta {
    Vec2 center;
    double eta = 0.0;
    int node_count = 0;
    std::vector<Vec2> nodes;
    std::vector<double> weights;
};

/// Build an M-node circle rule for the smeared Dirac mass. Requires M >= 8.
SmearedDelta smeared_delta(const Vec2& center, double eta, int node_count = 256);

/// Quadrature of f against the smeared mass: sum_m w_m f(node_m).
template <typename F>
double integrate(const SmearedDelta& d, F&& f) {
    double s = 0.0;
    for (int m = 0; m < d.node_count; ++m) s += d.weights[m] * f(d.nodes[m]);
    return s;
}

// --- cell-exact helpers used wherever the log kernel meets a grid ---

/// Exact integral of g over the axis-aligned rectangle [x0,x1]x[y0,y1]
/// relative to a singularity at the origin (origin may lie inside).
double integral_g_rect(double x0, double x1, double y0, double y1);

/// Exact integral of grad g over the same rectangle (zero if the rectangle
/// is symmetric about the origin).
Vec2 integral_grad_g_rect(double x0, double x1, double y0, double y1);

/// Mean of g over the disc of radius r centered at the singularity:
/// g_tilde(r) + 1/(4pi).
double disc_mean_g(double r);

struct TruncationVector {
    std::vector<double> eta;  // strictly positive, one entry per vortex
};

struct FieldSample {
    Vec2 grad_H;
    bool inside_circle = false;  // evaluation point fell inside a smearing circle
};

/// grad H_{N,eta} = grad g * (sum_i delta_{x_i}^{(eta_i)} - N mu) evaluated at
/// the given points. Particle terms use grad_g_trunc; the mu term uses
/// midpoint grid quadrature with exact cell integrals of grad g within two
/// cells of the evaluation point. Pass mu = nullptr for the mu-free test mode.
std::vector<FieldSample> field_grad_H(const VortexEnsemble& ensemble,
                                      const TruncationVector& etas,
                                      const VorticityGrid* mu,
                                      const std::vector<Vec2>& points);

}  // namespace coulomb
}  // namespace vortexmf
