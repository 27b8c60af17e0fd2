#pragma once

#include <optional>
#include <vector>

// Osgood machinery, the decay envelope of the mean-field theorem, the
// admissibility window, and the epsilon schedules closing the energy
// inequality.

namespace vortexmf {
namespace bounds {

/// M(x) = ln ln(1/x) on (0, e^-1].
double osgood_M(double x);
/// M^-1(y) = exp(-exp(y)) on [0, inf).
double osgood_Minv(double y);

/// <r>_eps = sqrt(eps^2 + r^2).
double regularizer(double r, double eps);
/// The default regularization scale eps = ln(N)/N.
double default_eps(int N);

struct EpsilonSchedule {
    double eps1 = 0.0;
    double eps2 = 0.0;
    double eps3 = 0.0;
};

/// eps3 = min{G, e^-1, 1/xi_inf}; eps2 solves eps2 |ln eps2| = eps3^2 on
/// (0, e^-1); eps1 = eps2^2.
EpsilonSchedule epsilon_schedule(double G, int N, double xi_inf);

struct EnvelopeParams {
    double xi_inf = 0.0;      // ||xi0||_inf
    double sigma_grad = 0.0;  // ||grad sigma||^2 in l2_k Linf
    double C = 1.0;           // fitted constant
    double F0 = 0.0;          // |F_avg| at t = 0
    int N = 2;
    double t = 0.0;
};

/// (F0 + C t (xi_inf + sigma_grad) (ln N)^2 / N)^{exp(-C t (xi_inf + sigma_grad))}.
double envelope(const EnvelopeParams& p);
/// Same but with the (ln(N / ln N))^2 rate of the closure argument.
double envelope_closure_rate(const EnvelopeParams& p);

/// (ln N)/N <= min{e^-1, 1/xi_inf} and the ln ln smallness condition.
bool admissible(const EnvelopeParams& p);

struct MaximalSeries {
    std::vector<double> times;
    std::vector<double> values;  // running sup of E<F_avg>_{ln N / N}
};

/// Running-sup wrapper over a raw series.
MaximalSeries make_maximal(const std::vector<double>& times, const std::vector<double>& raw);

struct ClosureResult {
    std::vector<double> bound;        // per-time Osgood-closed bound
    bool inequality_holds = true;     // series <= G0 + A int |ln G| G + B t (trapezoid)
    double worst_margin = 0.0;        // max over times of series - rhs
    std::optional<double> exit_time;  // first time the series leaves (0, e^-1)
};

/// Close G(t) <= G(0) + A int_0^t |ln G| G ds + B t with the Osgood lemma:
/// bound(t) = M^-1( M(G(0) + B t) - A t ). Also verifies the integral
/// inequality on the sampled series by trapezoid quadrature.
ClosureResult osgood_closure(const MaximalSeries& series, double A, double B);

}  // namespace bounds
}  // namespace vortexmf
