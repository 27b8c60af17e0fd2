#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "vortexmf/euler_pde.hpp"
#include "vortexmf/geometry.hpp"

// Free-space potential machinery for the energy functionals: zero-padded FFT
// convolution with the log kernel (exact cell rules at the singularity),
// complex multipole expansion of compactly supported sources, and the
// analytic exterior tail of the field energy.

namespace vortexmf {
namespace free_space {

// phi = g * mu on the grid's own cells, treating mu as a sum of cell point
// masses xi_c h^2 with the self-cell replaced by the equal-area-disc mean of
// g. Bit-matches a direct double loop over cells with the same kernel rule.
class PotentialTable {
  public:
    PotentialTable(double L, int n);
    ~PotentialTable();
    PotentialTable(const PotentialTable&) = delete;
    PotentialTable& operator=(const PotentialTable&) = delete;

    std::vector<double> potential(const VorticityGrid& mu) const;
    /// Gradient components of the same convolution; cell offsets within two
    /// cells of the singularity use exact rectangle integrals of grad g.
    void gradient(const VorticityGrid& mu, std::vector<double>& gx,
                  std::vector<double>& gy) const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// g integrated against mu at an arbitrary point: midpoint cell sums with the
/// equal-area-disc rule for the cell containing the point and exact rectangle
/// integrals for cells within two cells of it. O(n^2) per call.
double potential_at(const VorticityGrid& mu, const Vec2& p);
Vec2 potential_gradient_at(const VorticityGrid& mu, const Vec2& p);

// Complex moments a_m = int w^m dnu(w), w = x + iy, of a signed measure made
// of particle unit masses minus N * mu. Valid outside the source support.
struct Multipole {
    double total_mass = 0.0;
    std::vector<std::complex<double>> a;  // a[m-1] = m-th moment, m = 1..order

    /// Potential g * nu at z (|z| beyond the source radius).
    double potential(const Vec2& z) const;
    /// Gradient of the potential at z.
    Vec2 gradient(const Vec2& z) const;
    /// int_{|z| > R} |grad(g * nu)|^2 dz, requires total_mass == 0:
    /// (1/4pi) sum_m |a_m|^2 / (m R^{2m}).
    double tail_energy(double R) const;
};

Multipole multipole_particles(const std::vector<Vec2>& xs, int order);
Multipole multipole_grid(const VorticityGrid& mu, double weight, int order);
Multipole multipole_combined(const std::vector<Vec2>& xs, const VorticityGrid& mu,
                             double grid_weight, int order);

}  // namespace free_space
}  // namespace vortexmf
