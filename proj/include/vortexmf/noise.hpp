#pragma once

#include <cstdint>
#include <vector>

#include "vortexmf/geometry.hpp"

// Finite family of smooth divergence-free fields sigma_k driving the
// transport noise, plus the counter-based Brownian increment source shared
// by the particle and PDE solvers.

namespace vortexmf {

enum class ModeKind { Constant, Fourier };

struct NoiseMode {
    ModeKind kind = ModeKind::Constant;
    double c = 0.0;        // amplitude
    Vec2 k;                // wavevector (fourier only, nonzero)
    double theta = 0.0;    // phase (fourier only)
    Vec2 direction{1, 0};  // unit vector (constant only)
};

struct NoiseModel {
    std::vector<NoiseMode> modes;

    int count() const { return static_cast<int>(modes.size()); }

    /// sigma_k(x): constant mode c*d; fourier mode c*(k_perp/|k|) cos(k.x + theta).
    Vec2 sigma_eval(int k, const Vec2& x) const;

    /// Analytic Jacobian of sigma_k at x (zero for constant modes).
    Mat2 grad_sigma_eval(int k, const Vec2& x) const;

    /// (1/2) sum_k (sigma_k . grad) sigma_k at x.
    Vec2 ito_correction(const Vec2& x) const;

    /// (l2_k of ||sigma_k||_inf, l2_k of ||grad sigma_k||_inf), closed form:
    /// ||sigma_k||_inf = |c|, ||grad sigma_k||_inf = |c||k| (fourier) or 0.
    struct Norms {
        double sigma = 0.0;
        double grad_sigma = 0.0;
    };
    Norms norms() const;

    bool all_constant() const;
    double max_amplitude() const;
};

// Reproducible Gaussian increments keyed by (seed, mode, step). A value is a
// pure function of its key, so any number of consumers see the same path
// without shared state.
struct BrownianPath {
    std::uint64_t seed = 0;
    double dt = 0.0;

    BrownianPath() = default;
    BrownianPath(std::uint64_t seed_, double dt_) : seed(seed_), dt(dt_) {}

    /// Standard normal draw keyed by (seed, k, n).
    static double standard_normal(std::uint64_t seed, std::uint64_t k, std::uint64_t n);

    /// N(0, dt) increment for mode k at step n.
    double increment(std::uint64_t k, std::uint64_t n) const {
        return std::sqrt(dt) * standard_normal(seed, k, n);
    }

    /// Increments for modes [0, K) at step n.
    std::vector<double> increments(int num_modes, std::uint64_t n) const;

    /// Uniform draw in [0,1) for the same key space (sampling utilities).
    static double uniform01(std::uint64_t seed, std::uint64_t k, std::uint64_t n);
};

}  // namespace vortexmf
