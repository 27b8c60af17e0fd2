#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vortexmf/geometry.hpp"
#include "vortexmf/noise.hpp"

// Time integration of the stochastic point vortex system with mean-field
// weights a_i = 1/N: Heun (Stratonovich) steps for transport noise and
// Euler-Maruyama for the additive-noise comparison system.

namespace vortexmf {

struct VortexEnsemble {
    std::vector<Vec2> positions;

    int size() const { return static_cast<int>(positions.size()); }
    double weight() const { return 1.0 / static_cast<double>(positions.size()); }

    double min_pair_distance() const;
    Vec2 center_of_vorticity() const;
    /// sum_{i != j} a^2 g(x_i - x_j), the discrete interaction energy.
    double interaction_energy() const;
};

struct StepStats {
    double dt = 0.0;
    double min_pair_distance = 0.0;
    double max_drift = 0.0;
    double noise_increment_norm = 0.0;
};

class CollisionError : public std::runtime_error {
  public:
    CollisionError(int i, int j, double dist, double t)
        : std::runtime_error("vortex pair (" + std::to_string(i) + "," + std::to_string(j) +
                             ") at distance " + std::to_string(dist) + ", t=" + std::to_string(t)),
          pair_i(i), pair_j(j), distance(dist), time(t) {}
    int pair_i, pair_j;
    double distance, time;
};

/// v_i = sum_{j != i} a grad_perp g(x_i - x_j); direct O(N^2) summation.
/// Throws CollisionError on a coincident pair.
std::vector<Vec2> drift(const VortexEnsemble& ensemble);

// Optional blob regularization for robustness studies; the exact kernel
// (blob = 0) is the configuration everything else in this project uses.
std::vector<Vec2> drift_blob(const VortexEnsemble& ensemble, double blob);

inline constexpr double kCollisionFloor = 1e-10;

/// One Heun step for dx_i = drift dt + sum_k sigma_k(x_i) o dW^k:
/// predictor with start-point coefficients, corrector averaging drift and
/// noise coefficients at start and predictor point. Deterministic given
/// (path.seed, n).
StepStats step_stratonovich(VortexEnsemble& ensemble, const NoiseModel& noise,
                            const BrownianPath& path, std::uint64_t n, double dt,
                            double blob = 0.0);

/// Euler-Maruyama step of the additive-noise system: independent 2D
/// increments per vortex scaled by sqrt(2 nu). Mode index 2i / 2i+1 of the
/// path keys the x / y component of vortex i.
void step_additive(VortexEnsemble& ensemble, double nu, const BrownianPath& path,
                   std::uint64_t n, double dt);

struct DtController {
    double dt_max = 1e-2;
    double c_cfl = 0.1;  // dt <= c_cfl * d_min / V_max
};

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<Vec2>> frames;
    std::vector<StepStats> stats;
};

/// Iterate step_stratonovich to time T with the adaptive controller,
/// recording a frame every sample_stride steps (and the final state).
Trajectory run(VortexEnsemble ensemble, const NoiseModel& noise, const BrownianPath& path,
               double T, const DtController& ctrl, int sample_stride = 1);

/// Trajectory dump: CSV rows t,i,x,y.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

}  // namespace vortexmf
