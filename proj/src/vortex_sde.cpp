#include "vortexmf/vortex_sde.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "vortexmf/coulomb.hpp"

namespace vortexmf {

double VortexEnsemble::min_pair_distance() const {
    const int N = size();
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j)
            best = std::min(best, (positions[i] - positions[j]).norm());
    return best;
}

Vec2 VortexEnsemble::center_of_vorticity() const {
    Vec2 c;
    for (const Vec2& p : positions) c += p;
    return c / static_cast<double>(size());
}

double VortexEnsemble::interaction_energy() const {
    const int N = size();
    const double a2 = weight() * weight();
    double e = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            if (i != j) e += a2 * coulomb::g(positions[i] - positions[j]);
    return e;
}

std::vector<Vec2> drift_blob(const VortexEnsemble& ensemble, double blob) {
    const int N = ensemble.size();
    const double a = ensemble.weight();
    const double b2 = blob * blob;
    std::vector<Vec2> v(N);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < N; ++i) {
        Vec2 acc;
        for (int j = 0; j < N; ++j) {
            if (j == i) continue;
            const Vec2 d = ensemble.positions[i] - ensemble.positions[j];
            const double r2 = d.norm2() + b2;
            if (r2 == 0.0) throw CollisionError(i, j, 0.0, 0.0);
            // grad_perp g(d) = (-d.y, d.x) * (-1 / (2 pi r^2))
            const double f = -a / (coulomb::kTwoPi * r2);
            acc += Vec2{-d.y, d.x} * f;
        }
        v[i] = acc;
    }
    return v;
}

std::vector<Vec2> drift(const VortexEnsemble& ensemble) { return drift_blob(ensemble, 0.0); }

namespace {

std::vector<Vec2> noise_displacement(const NoiseModel& noise, const std::vector<Vec2>& pos,
                                     const std::vector<double>& dW) {
    std::vector<Vec2> disp(pos.size());
    for (int k = 0; k < noise.count(); ++k) {
        if (dW[k] == 0.0) continue;
        for (size_t i = 0; i < pos.size(); ++i) disp[i] += dW[k] * noise.sigma_eval(k, pos[i]);
    }
    return disp;
}

}  // namespace

StepStats step_stratonovich(VortexEnsemble& ensemble, const NoiseModel& noise,
                            const BrownianPath& path, std::uint64_t n, double dt, double blob) {
    if (dt <= 0.0) throw std::invalid_argument("step_stratonovich: dt must be positive");
    const int N = ensemble.size();
    const double sqdt = std::sqrt(dt);

    std::vector<double> dW(noise.count());
    for (int k = 0; k < noise.count(); ++k)
        dW[k] = sqdt * BrownianPath::standard_normal(path.seed, k, n);

    const std::vector<Vec2> b0 = drift_blob(ensemble, blob);
    const std::vector<Vec2> s0 = noise_displacement(noise, ensemble.positions, dW);

    VortexEnsemble pred = ensemble;
    for (int i = 0; i < N; ++i) pred.positions[i] += dt * b0[i] + s0[i];

    const std::vector<Vec2> b1 = drift_blob(pred, blob);
    const std::vector<Vec2> s1 = noise_displacement(noise, pred.positions, dW);

    StepStats st;
    st.dt = dt;
    double w2 = 0.0;
    for (double w : dW) w2 += w * w;
    st.noise_increment_norm = std::sqrt(w2);
    for (int i = 0; i < N; ++i) {
        ensemble.positions[i] += 0.5 * dt * (b0[i] + b1[i]) + 0.5 * (s0[i] + s1[i]);
        st.max_drift = std::max(st.max_drift, std::max(b0[i].norm(), b1[i].norm()));
    }
    st.min_pair_distance = (N > 1) ? ensemble.min_pair_distance() : std::numeric_limits<double>::infinity();
    if (N > 1 && st.min_pair_distance < kCollisionFloor) {
        // locate the offending pair for the error message
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) {
                const double d = (ensemble.positions[i] - ensemble.positions[j]).norm();
                if (d < kCollisionFloor) throw CollisionError(i, j, d, n * dt);
            }
    }
    return st;
}

void step_additive(VortexEnsemble& ensemble, double nu, const BrownianPath& path, std::uint64_t n,
                   double dt) {
    if (nu < 0.0) throw std::invalid_argument("step_additive: nu must be nonnegative");
    const int N = ensemble.size();
    const std::vector<Vec2> b = drift(ensemble);
    const double amp = std::sqrt(2.0 * nu) * std::sqrt(dt);
    for (int i = 0; i < N; ++i) {
        const double gx = BrownianPath::standard_normal(path.seed, 2 * i, n);
        const double gy = BrownianPath::standard_normal(path.seed, 2 * i + 1, n);
        ensemble.positions[i] += dt * b[i] + amp * Vec2{gx, gy};
    }
    if (N > 1 && ensemble.min_pair_distance() < kCollisionFloor) {
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) {
                const double d = (ensemble.positions[i] - ensemble.positions[j]).norm();
                if (d < kCollisionFloor) throw CollisionError(i, j, d, n * dt);
            }
    }
}

Trajectory run(VortexEnsemble ensemble, const NoiseModel& noise, const BrownianPath& path,
               double T, const DtController& ctrl, int sample_stride) {
    Trajectory traj;
    double t = 0.0;
    std::uint64_t n = 0;
    traj.times.push_back(0.0);
    traj.frames.push_back(ensemble.positions);

    double dmin = ensemble.size() > 1 ? ensemble.min_pair_distance()
                                      : std::numeric_limits<double>::infinity();
    double vmax = 0.0;
    for (const Vec2& v : drift(ensemble)) vmax = std::max(vmax, v.norm());

    while (t < T) {
        double dt = ctrl.dt_max;
        if (vmax > 0.0) dt = std::min(dt, ctrl.c_cfl * dmin / vmax);
        dt = std::min(dt, T - t);
        StepStats st;
        try {
            st = step_stratonovich(ensemble, noise, path, n, dt);
        } catch (const CollisionError& e) {
            throw CollisionError(e.pair_i, e.pair_j, e.distance, t + dt);
        }
        t += dt;
        ++n;
        dmin = st.min_pair_distance;
        vmax = st.max_drift;
        traj.stats.push_back(st);
        if (n % sample_stride == 0 || t >= T) {
            traj.times.push_back(t);
            traj.frames.push_back(ensemble.positions);
        }
    }
    return traj;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream f(path);
    f << "t,i,x,y\n";
    f.precision(17);
    for (size_t s = 0; s < traj.frames.size(); ++s)
        for (size_t i = 0; i < traj.frames[s].size(); ++i)
            f << traj.times[s] << ',' << i << ',' << traj.frames[s][i].x << ','
              << traj.frames[s][i].y << '\n';
}

}  // namespace vortexmf
