#pragma once

#include <vector>

#include "vortexmf/coulomb.hpp"
#include "vortexmf/euler_pde.hpp"
#include "vortexmf/vortex_sde.hpp"

// The renormalized modulated energy of a vortex configuration against a
// mean-field density, its smeared variant, truncation radii, close-pair
// counts, and the negative-order Sobolev distance.

namespace vortexmf {
namespace energy {

struct EnergyReport {
    double F_avg = 0.0;    // term_pp - 2 term_px + term_xx
    double term_pp = 0.0;  // (1/N^2) sum_{i!=j} g(x_i - x_j)
    double term_px = 0.0;  // (1/N) sum_i int g(x_i - y) xi(y) dy
    double term_xx = 0.0;  // int int g xi xi
    double smeared = std::numeric_limits<double>::quiet_NaN();
    coulomb::TruncationVector r_vec;
    long close_pairs = 0;
    double hs_distance = std::numeric_limits<double>::quiet_NaN();
    double min_dist = 0.0;
    double t = 0.0;

    double F_N(int N) const { return F_avg * N * N; }
};

/// F_avg with all three constituents. The grid must be a probability density
/// supported in the box core; pass nullptr in the mu-free diagnostic mode
/// (then only term_pp is nonzero).
EnergyReport modulated_energy(const VortexEnsemble& ensemble, const VorticityGrid* grid);

struct SmearedOptions {
    int circle_nodes = 256;
    int multipole_order = 24;
    int boundary_nodes_per_edge = 1024;
    int upsample_factor = 8;
};

struct SmearedResult {
    double value = 0.0;          // int |grad H_{N,eta}|^2 over the plane
    bool overlapping = false;    // some smearing circles overlap (flagged, value still valid)
};

/// int int g d(N mu - sum_i delta^{(eta_i)})^2 evaluated through the field
/// H_{N,eta}: Green identity on the box (boundary flux of H against its
/// normal derivative, circle averages of H, H against mu) plus the analytic
/// multipole tail outside the box. Nonnegative up to quadrature error.
SmearedResult smeared_energy(const VortexEnsemble& ensemble,
                             const coulomb::TruncationVector& etas, const VorticityGrid& grid,
                             const SmearedOptions& opt = {});

/// r_{i,eps1} = min{ (1/4) min_{j != i} |x_i - x_j|, eps1 }.
coulomb::TruncationVector r_vec(const VortexEnsemble& ensemble, double eps1);

/// Ordered pairs (i, j), i != j, with |x_i - x_j| <= eps3.
long close_pairs(const VortexEnsemble& ensemble, double eps3);

/// H^s norm of xi_N - xi for s < -1, computed on a padded box (factor 2):
/// exact particle phase factors plus the grid's spectral coefficients,
/// weighted by <k>^{2s}.
double sobolev_distance(const VortexEnsemble& ensemble, const VorticityGrid& grid, double s);

/// Full report at one time: energy terms, smeared value at eta = r_vec(eps1),
/// close pairs at eps3, H^s distance.
EnergyReport full_report(const VortexEnsemble& ensemble, const VorticityGrid& grid, double eps1,
                         double eps3, double s = -2.0, bool with_smeared = false,
                         bool with_hs = true);

}  // namespace energy
}  // namespace vortexmf
