#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vortexmf/geometry.hpp"
#include "vortexmf/noise.hpp"

// Pseudo-spectral solver for the stochastic Euler vorticity equation on a
// periodic box [-L, L)^2, driven by the same Brownian increments as the
// particle system, plus the tracer flow-map representation.

namespace vortexmf {

struct VorticityGrid {
    double L = 0.0;  // box half-length
    int n = 0;       // resolution per side
    double t = 0.0;
    std::vector<double> values;  // row-major, values[j*n + i] at cell centers

    VorticityGrid() = default;
    VorticityGrid(double L_, int n_) : L(L_), n(n_), values(static_cast<size_t>(n_) * n_, 0.0) {}

    double h() const { return 2.0 * L / n; }
    double cell_area() const { return h() * h(); }
    Vec2 cell_center(int i, int j) const {
        return {-L + (i + 0.5) * h(), -L + (j + 0.5) * h()};
    }
    double& at(int i, int j) { return values[static_cast<size_t>(j) * n + i]; }
    double at(int i, int j) const { return values[static_cast<size_t>(j) * n + i]; }

    double mass() const;
    double min_value() const;
    /// Largest |coordinate| over cells with |value| above rel_floor times the
    /// max value: the effective support contour, insensitive to spectral
    /// ringing in the far field.
    double support_radius(double rel_floor = 1e-3) const;
    /// Multiply values so the mass is exactly `target`.
    void renormalize_mass(double target = 1.0);
    /// Clip values in (-eps_neg, 0) to zero, then renormalize. Values below
    /// -eps_neg are reported via the return (count) for the caller to flag.
    int clip_negative(double eps_neg = 1e-8);

    /// Discrete L^p norm over cells (p = 1, 2, or infinity via p <= 0).
    double lp_norm(double p) const;

    /// int ln<x> d(xi) and int int ln<x-y> d(xi)d(xi); the second by padded
    /// spectral convolution of the smooth kernel ln<z>.
    struct LogMoments {
        double first = 0.0;
        double second = 0.0;
    };
    LogMoments moment_check() const;
};

struct VelocityGrid {
    int n = 0;
    std::vector<double> ux, uy;  // row-major at cell centers
    double max_speed() const;
};

class CflError : public std::runtime_error {
  public:
    explicit CflError(const std::string& msg) : std::runtime_error(msg) {}
};
class SupportError : public std::runtime_error {
  public:
    explicit SupportError(const std::string& msg) : std::runtime_error(msg) {}
};

// Owns the FFT work buffers for a fixed (L, n). Grids are value snapshots;
// a solver step writes a new snapshot.
class SpectralSolver {
  public:
    SpectralSolver(double L, int n);
    ~SpectralSolver();
    SpectralSolver(const SpectralSolver&) = delete;
    SpectralSolver& operator=(const SpectralSolver&) = delete;

    /// u = grad_perp g * xi by spectral inversion; k = 0 velocity mode zero.
    VelocityGrid biot_savart(const VorticityGrid& grid);

    /// Advective CFL bound for the current grid: c_adv * h / max|u|.
    double cfl_dt(const VorticityGrid& grid, double c_adv = 0.5);

    /// Strang-split step: deterministic half-step (pseudo-spectral RK2, 2/3
    /// dealiased), stochastic transport by the frozen field sum_k sigma_k dW^k
    /// via midpoint semi-Lagrangian displacement, deterministic half-step.
    /// Mass is renormalized to its entry value. Throws CflError / SupportError.
    void step(VorticityGrid& grid, const NoiseModel& noise, const BrownianPath& path,
              std::uint64_t n, double dt);

    /// Deterministic advection substep only (used by step; exposed for tests).
    void advect(VorticityGrid& grid, double dt);

    int n() const { return n_; }
    double L() const { return L_; }

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    double L_;
    int n_;
};

// Tracer representation of the flow map: positions Phi_t(y_m) with carried
// initial values xi0(y_m).
struct FlowMap {
    std::vector<Vec2> tracers;
    std::vector<double> carried_xi0;
};

enum class FlowVelocity { GridCoupled, SelfConsistent };

/// Advance tracers one Heun/Stratonovich step. GridCoupled interpolates the
/// solver's Biot-Savart velocity (bicubic); SelfConsistent sums the
/// blob-regularized kernel over the tracer cloud itself.
void flow_step(FlowMap& flow, const SpectralSolver& solver, const VorticityGrid* grid,
               FlowVelocity mode, double tracer_weight, double blob, const NoiseModel& noise,
               const BrownianPath& path, std::uint64_t n, double dt);

/// Deposit tracers (weighted by carried xi0) onto a grid for comparison
/// against the PDE solution.
VorticityGrid pushforward_histogram(const FlowMap& flow, double tracer_weight, double L, int n);

/// Periodic Catmull-Rom sampling of a cell-centered field on [-L, L)^2.
double sample_bicubic_periodic(const std::vector<double>& f, int n, double L, const Vec2& p);

// Named initial data profiles; all normalized to unit mass on the grid.
VorticityGrid make_gaussian(double L, int n, double width);
VorticityGrid make_smoothed_disc(double L, int n, double radius, double smoothing);
VorticityGrid make_two_blob(double L, int n, double separation, double width);

/// Flat binary row-major doubles plus a text sidecar (L, n, t, mass).
void write_grid_binary(const VorticityGrid& grid, const std::string& path_prefix);
VorticityGrid read_grid_binary(const std::string& path_prefix);
/// Coarse CSV frame for plotting (every `stride`-th cell).
void write_grid_csv(const VorticityGrid& grid, const std::string& path, int stride = 4);

}  // namespace vortexmf
