#include "vortexmf/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace vortexmf {

namespace {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t k, std::uint64_t n) {
    std::uint64_t z = splitmix64(seed ^ 0x8C9F0B3E2D4A5617ULL);
    z = splitmix64(z ^ (k + 0xA511E9B3D96C8F01ULL));
    z = splitmix64(z ^ (n + 0xC2B2AE3D27D4EB4FULL));
    return z;
}

inline double to_unit(std::uint64_t bits) {
    // 53-bit mantissa in (0, 1]
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

double BrownianPath::standard_normal(std::uint64_t seed, std::uint64_t k, std::uint64_t n) {
    const std::uint64_t z = mix_key(seed, k, n);
    const double u1 = to_unit(z);
    const double u2 = to_unit(splitmix64(z ^ 0xD1B54A32D192ED03ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double BrownianPath::uniform01(std::uint64_t seed, std::uint64_t k, std::uint64_t n) {
    return to_unit(mix_key(seed, k, n)) - 0x1.0p-53;
}

std::vector<double> BrownianPath::increments(int num_modes, std::uint64_t n) const {
    std::vector<double> out(num_modes);
    const double s = std::sqrt(dt);
    for (int k = 0; k < num_modes; ++k) out[k] = s * standard_normal(seed, k, n);
    return out;
}

Vec2 NoiseModel::sigma_eval(int k, const Vec2& x) const {
    if (k < 0 || k >= count()) throw std::out_of_range("NoiseModel::sigma_eval: mode index");
    const NoiseMode& m = modes[k];
    if (m.kind == ModeKind::Constant) return m.c * m.direction;
    const Vec2 dir = m.k.perp() / m.k.norm();
    return m.c * std::cos(m.k.dot(x) + m.theta) * dir;
}

Mat2 NoiseModel::grad_sigma_eval(int k, const Vec2& x) const {
    if (k < 0 || k >= count()) throw std::out_of_range("NoiseModel::grad_sigma_eval: mode index");
    const NoiseMode& m = modes[k];
    if (m.kind == ModeKind::Constant) return {};
    const Vec2 dir = m.k.perp() / m.k.norm();
    const double s = -m.c * std::sin(m.k.dot(x) + m.theta);
    // d_j sigma_i = -c dir_i k_j sin(k.x + theta)
    return {s * dir.x * m.k.x, s * dir.x * m.k.y, s * dir.y * m.k.x, s * dir.y * m.k.y};
}

Vec2 NoiseModel::ito_correction(const Vec2& x) const {
    Vec2 acc;
    for (int k = 0; k < count(); ++k) {
        if (modes[k].kind == ModeKind::Constant) continue;
        acc += grad_sigma_eval(k, x).apply(sigma_eval(k, x));
    }
    return 0.5 * acc;
}

NoiseModel::Norms NoiseModel::norms() const {
    double s2 = 0.0, g2 = 0.0;
    for (const NoiseMode& m : modes) {
        s2 += m.c * m.c;
        if (m.kind == ModeKind::Fourier) g2 += m.c * m.c * m.k.norm2();
    }
    return {std::sqrt(s2), std::sqrt(g2)};
}

bool NoiseModel::all_constant() const {
    for (const NoiseMode& m : modes)
        if (m.kind != ModeKind::Constant) return false;
    return true;
}

double NoiseModel::max_amplitude() const {
    double a = 0.0;
    for (const NoiseMode& m : modes) a = std::max(a, std::abs(m.c));
    return a;
}

}  // namespace vortexmf
