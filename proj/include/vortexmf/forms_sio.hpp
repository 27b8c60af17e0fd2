#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "vortexmf/euler_pde.hpp"
#include "vortexmf/geometry.hpp"
#include "vortexmf/vortex_sde.hpp"

// Commutator bilinear forms with the Coulomb kernels, the mollification
// machinery, and the singular-integral operators grad T_{1,v} grad and
// grad T_{2,v} grad with their discrete principal-value assembly.

namespace vortexmf {
namespace forms {

// A velocity field with analytic or tabulated derivatives and reported
// regularity seminorms. Evaluation closures are shared, so copies are cheap.
struct VelocityFieldModel {
    std::string name;
    std::function<Vec2(const Vec2&)> v;
    std::function<Mat2(const Vec2&)> grad_v;
    double sup_norm = 0.0;       // ||v||_inf over the working box
    double lip = 0.0;            // ||grad v||_inf
    double log_lip = 0.0;        // log-Lipschitz seminorm (= lip when Lipschitz)
};

VelocityFieldModel make_constant_field(const Vec2& value);
VelocityFieldModel make_linear_field(const Mat2& A);                    // v(x) = A x
VelocityFieldModel make_identity_field();                               // v(x) = x
VelocityFieldModel make_noise_mode_field(const NoiseModel& model, int k);
/// Biot-Savart velocity of a grid, bicubic interpolation, spectral Jacobian.
VelocityFieldModel make_biot_savart_field(const SpectralSolver& solver,
                                          const VorticityGrid& grid);
/// Log-Lipschitz (not Lipschitz) test profile built from r ln(1/r).
VelocityFieldModel make_log_lipschitz_field(double amplitude);
/// Smooth random superposition of a few Fourier modes keyed by `seed`.
VelocityFieldModel make_random_fourier_field(std::uint64_t seed, int modes, double amplitude);

// xi_N - xi: particle part weighted +1/N each, grid part weighted -1.
struct SignedMeasurePair {
    const VortexEnsemble* particles = nullptr;  // may be null (grid-only measure)
    const VorticityGrid* field = nullptr;       // may be null (particles-only)
    double total_signed_mass() const;
};

/// Angular average of K_{1,v} at the diagonal: -(tr grad v) / (4 pi).
double k1_diagonal_limit(const Mat2& grad_v);
/// Angular average of K_{2,v} at the diagonal.
double k2_diagonal_limit(const Mat2& grad_v);

/// int intK_{1,v} d m d m over the off-diagonal: exact particle double sum,
/// grid terms by cell quadrature with the diagonal-limit rule for the
/// coincident cell. Spectral convolutions carry the grid-grid part.
double form_K1(const VelocityFieldModel& v, const SignedMeasurePair& m);
/// Same with the Hessian kernel K_{2,v}.
double form_K2(const VelocityFieldModel& v, const SignedMeasurePair& m);

/// Mollification v_eps = chi_eps * v with the radial plateau bump chi
/// (mass 1, equal to 1 on |x| <= 1/4, supported in |x| <= 1). Quadrature on
/// a polar stencil of radius eps.
VelocityFieldModel mollify(const VelocityFieldModel& v, double eps);

/// The radial profile chi(r) itself (unit mass in 2D), for tests.
double mollifier_chi(double r);

// Boundary constants of the Schwartz-kernel identities, evaluated by S^1
// quadrature with arc-length normalization.
double boundary_constant_C(int beta, int gamma);                        // C_{beta gamma}
double boundary_constant_C1(int alpha, int rho, int beta, int gamma);   // C^{alpha rho}_{beta gamma}
double boundary_constant_C2a(int g1, int g2, int b2, int a, int b, int a2);  // C^{gamma gamma' beta'}_{alpha beta alpha'}
double boundary_constant_C2b(int g1, int b2, int a, int b);                  // C^{gamma beta'}_{alpha beta}

/// Appendix component kernels (all even, homogeneous of degree -2, zero
/// average on S^1). Indices are 0-based.
double kernel_K0(int a, int b, const Vec2& z);
double kernel_K1(int a, int b, int r, int nu, const Vec2& z);
double kernel_K2(int a, int b, int a2, int b2, int g1, int g2, const Vec2& z);

struct SioOutput {
    int n = 0;
    // component (alpha, beta) of the matrix-valued output, row-major grids
    std::array<std::vector<double>, 4> comp;
    const std::vector<double>& at(int alpha, int beta) const { return comp[2 * alpha + beta]; }
};

class SioWorkspace;  // owns FFT buffers and kernel tables for fixed (L, n)

/// Discrete grad T_{order,v} grad applied to f: principal-value convolution
/// assembly (singular cell excluded, near cells by exact cell integrals,
/// analytic local residues) plus the boundary-constant terms.
SioOutput sio_apply(SioWorkspace& ws, const VelocityFieldModel& v,
                    const std::vector<double>& f, int order);

class SioWorkspace {
  public:
    SioWorkspace(double L, int n);
    ~SioWorkspace();
    SioWorkspace(const SioWorkspace&) = delete;
    SioWorkspace& operator=(const SioWorkspace&) = delete;
    int n() const;
    double L() const;

    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct OperatorNormProbe {
    int order = 0;
    int grid_n = 0;
    double norm_estimate = 0.0;  // fitted operator norm of grad T grad
    double fitted_C = 0.0;       // norm / ||grad v||^order
    int probes = 0;
};

/// Random smooth unit-L2 probes plus power iteration; returns the largest
/// Rayleigh quotient seen.
OperatorNormProbe probe_operator_norm(double L, int n, const VelocityFieldModel& v, int order,
                                      int probes, int power_iters, std::uint64_t seed);

void write_probe_report_json(const std::vector<OperatorNormProbe>& probes,
                             const std::string& path);

}  // namespace forms
}  // namespace vortexmf
