#include "vortexmf/bounds.hpp"

#include <cmath>
#include <stdexcept>

namespace vortexmf {
namespace bounds {

double osgood_M(double x) {
    if (!(x > 0.0) || x > std::exp(-1.0))
        throw std::domain_error("osgood_M: x must lie in (0, e^-1]");
    return std::log(std::log(1.0 / x));
}

double osgood_Minv(double y) {
    if (y < 0.0) throw std::domain_error("osgood_Minv: y must be nonnegative");
    return std::exp(-std::exp(y));
}

double regularizer(double r, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("regularizer: eps must be positive");
    return std::sqrt(eps * eps + r * r);
}

double default_eps(int N) {
    if (N < 2) throw std::invalid_argument("default_eps: N must be at least 2");
    return std::log(static_cast<double>(N)) / N;
}

EpsilonSchedule epsilon_schedule(double G, int N, double xi_inf) {
    if (G <= 0.0) throw std::invalid_argument("epsilon_schedule: G must be positive");
    const double e_inv = std::exp(-1.0);
    if (N < 3 || default_eps(N) > std::min(e_inv, 1.0 / xi_inf))
        throw std::invalid_argument("epsilon_schedule: N too small for the schedule hypothesis");
    EpsilonSchedule s;
    s.eps3 = std::min(G, std::min(e_inv, 1.0 / xi_inf));
    // eps2 |ln eps2| = eps3^2; r |ln r| is increasing on (0, e^-1), so bisect
    const double target = s.eps3 * s.eps3;
    double lo = 0.0, hi = e_inv;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double val = mid * std::abs(std::log(mid));
        (val < target ? lo : hi) = mid;
    }
    s.eps2 = 0.5 * (lo + hi);
    if (!(s.eps2 > 0.0 && s.eps2 < e_inv))
        throw std::runtime_error("epsilon_schedule: no root in (0, e^-1)");
    s.eps1 = s.eps2 * s.eps2;
    return s;
}

namespace {
double rate(const EnvelopeParams& p, bool closure) {
    const double lnN = std::log(static_cast<double>(p.N));
    const double l = closure ? std::log(p.N / lnN) : lnN;
    return p.C * (p.xi_inf + p.sigma_grad) * l * l / p.N;
}
}  // namespace

double envelope(const EnvelopeParams& p) {
    const double kappa = p.C * p.t * (p.xi_inf + p.sigma_grad);
    return std::pow(p.F0 + rate(p, false) * p.t, std::exp(-kappa));
}

double envelope_closure_rate(const EnvelopeParams& p) {
    const double kappa = p.C * p.t * (p.xi_inf + p.sigma_grad);
    return std::pow(p.F0 + rate(p, true) * p.t, std::exp(-kappa));
}

bool admissible(const EnvelopeParams& p) {
    if (p.N < 2) return false;
    const double e_inv = std::exp(-1.0);
    const double lnN_over_N = std::log(static_cast<double>(p.N)) / p.N;
    if (lnN_over_N > std::min(e_inv, p.xi_inf > 0.0 ? 1.0 / p.xi_inf : e_inv)) return false;
    const double arg = p.F0 + rate(p, false) * p.t;
    if (!(arg > 0.0) || arg >= e_inv) return p.t == 0.0 && p.F0 < e_inv;
    return p.C * (p.xi_inf + p.sigma_grad) * p.t < std::log(std::log(1.0 / arg));
}

MaximalSeries make_maximal(const std::vector<double>& times, const std::vector<double>& raw) {
    MaximalSeries s;
    s.times = times;
    s.values.resize(raw.size());
    double sup = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < raw.size(); ++i) {
        sup = std::max(sup, raw[i]);
        s.values[i] = sup;
    }
    return s;
}

ClosureResult osgood_closure(const MaximalSeries& series, double A, double B) {
    if (series.times.size() != series.values.size() || series.values.empty())
        throw std::invalid_argument("osgood_closure: malformed series");
    ClosureResult out;
    const double e_inv = std::exp(-1.0);
    const double G0 = series.values.front();
    out.bound.resize(series.values.size());

    // trapezoid accumulation of A int |ln G| G
    double integral = 0.0;
    double prev_t = series.times.front();
    double prev_f = std::abs(std::log(series.values.front())) * series.values.front();
    for (size_t i = 0; i < series.values.size(); ++i) {
        const double t = series.times[i];
        const double G = series.values[i];
        if (!(G > 0.0) || G >= e_inv) {
            if (!out.exit_time) out.exit_time = t;
            out.bound[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        const double f = std::abs(std::log(G)) * G;
        integral += 0.5 * (f + prev_f) * (t - prev_t);
        prev_t = t;
        prev_f = f;

        const double rhs = G0 + A * integral + B * t;
        const double margin = G - rhs;
        out.worst_margin = std::max(out.worst_margin, margin);
        if (margin > 1e-12 * std::max(1.0, std::abs(rhs))) out.inequality_holds = false;

        // Osgood-closed bound with the additive term folded into the constant
        const double c = std::min(G0 + B * t, e_inv * (1.0 - 1e-15));
        out.bound[i] = osgood_Minv(std::max(0.0, osgood_M(c) - A * t));
    }
    return out;
}

}  // namespace bounds
}  // namespace vortexmf
