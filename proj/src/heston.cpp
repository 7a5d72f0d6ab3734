#include "filterbench/heston.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <cmath>
#include <limits>
#include <random>

#include "filterbench/rng.hpp"

namespace fb {

void HestonParams::validate() const {
    if (kappa <= 0 || xbar <= 0 || gamma <= 0)
        throw SpecError("HestonParams: kappa, xbar, gamma must be > 0");
    if (rho < -1.0 || rho > 1.0) throw SpecError("HestonParams: |rho| <= 1");
}

HestonPath simulate_heston(const HestonParams& p, double x0, double y0,
                           double dt, int n, std::uint64_t seed) {
    p.validate();
    if (dt <= 0 || dt > 1.0 / p.kappa)
        throw SpecError("simulate_heston: need 0 < dt <= 1/kappa");
    if (!p.feller())
        throw SpecError("simulate_heston: Feller condition violated");
    if (x0 <= 0) throw SpecError("simulate_heston: x0 must be > 0");

    auto rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    HestonPath path;
    path.dt = dt;
    path.x.resize(n + 1);
    path.y.resize(n + 1);
    path.x[0] = x0;
    path.y[0] = y0;
    const double sq = std::sqrt(dt);
    const double cc = p.kappa * p.xbar - 0.5 * p.gamma * p.gamma; // >= 0
    const double rbar = std::sqrt(1.0 - p.rho * p.rho);
    for (int k = 0; k < n; ++k) {
        double dB = sq * normal(rng);
        double dW = sq * normal(rng);
        double X = path.x[k];
        double D = (1.0 - p.kappa * dt) * X + cc * dt;
        double root = 0.5 * (p.gamma * dB +
                             std::sqrt(p.gamma * p.gamma * dB * dB + 4.0 * D));
        path.x[k + 1] = root * root;
        path.y[k + 1] = path.y[k] + (p.mu - 0.5 * X) * dt +
                        std::sqrt(X) * (p.rho * dB + rbar * dW);
    }
    return path;
}

double log_cir_density(const HestonParams& p, double v, double x, double dt) {
    p.validate();
    if (v < 0 || x <= 0 || dt <= 0)
        throw SpecError("cir_density: need v >= 0, x > 0, dt > 0");
    const double g2 = p.gamma * p.gamma;
    const double q = 2.0 * p.kappa * p.xbar / g2 - 1.0;
    const double e = std::exp(-p.kappa * dt);
    const double c = 2.0 * p.kappa / (g2 * (1.0 - e));
    const double u = c * v * e;
    const double w = c * x;
    const double z = 2.0 * std::sqrt(u * w);
    if (z < 1e-8) {
        // Series limit of the Bessel factor; exact gamma density at v = 0.
        return std::log(c) - u - w + q * std::log(w) - std::lgamma(q + 1.0);
    }
    gsl_sf_result res;
    gsl_error_handler_t* old = gsl_set_error_handler_off();
    int status = gsl_sf_bessel_Inu_scaled_e(q, z, &res);
    gsl_set_error_handler(old);
    double logI;
    if (status == GSL_SUCCESS && res.val > 0) {
        logI = std::log(res.val) + z;
    } else {
        // Uniform large-argument fallback: I_q(z) ~ e^z / sqrt(2 pi z).
        logI = z - 0.5 * std::log(2.0 * M_PI * z);
    }
    return std::log(c) - u - w + 0.5 * q * (std::log(w) - std::log(u)) + logI;
}

double cir_density(const HestonParams& p, double v, double x, double dt) {
    return std::exp(log_cir_density(p, v, x, dt));
}

VarianceGrid make_variance_grid(const HestonParams& p, int n_nodes,
                                double lo_mult, double hi_mult) {
    p.validate();
    if (n_nodes < 2) throw SpecError("make_variance_grid: need >= 2 nodes");
    VarianceGrid g;
    g.nodes = VectorXd(n_nodes);
    const double lo = std::log(lo_mult * p.xbar);
    const double hi = std::log(hi_mult * p.xbar);
    for (int i = 0; i < n_nodes; ++i)
        g.nodes(i) = std::exp(lo + (hi - lo) * i / (n_nodes - 1));
    g.weights = VectorXd(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        double l = (i == 0) ? g.nodes(0) : g.nodes(i - 1);
        double r = (i == n_nodes - 1) ? g.nodes(n_nodes - 1) : g.nodes(i + 1);
        g.weights(i) = 0.5 * (r - l);
    }
    // Start from the stationary Gamma(2 kappa xbar / gamma^2, gamma^2 / 2
    // kappa) law; a flat start puts almost all its mass on the far tail of
    // the geometric grid.
    const double shape = 2.0 * p.kappa * p.xbar / (p.gamma * p.gamma);
    const double scale = p.gamma * p.gamma / (2.0 * p.kappa);
    g.mass = VectorXd(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        double x = g.nodes(i);
        double logpdf = (shape - 1.0) * std::log(x) - x / scale -
                        shape * std::log(scale) - std::lgamma(shape);
        g.mass(i) = std::exp(logpdf) * g.weights(i);
    }
    g.mass /= g.mass.sum();
    return g;
}

VectorXd sv_filter_step(const HestonParams& p, const VarianceGrid& grid,
                        const VectorXd& prev_mass, double dY, double dt) {
    p.validate();
    if (dt <= 0) throw SpecError("sv_filter_step: dt must be > 0");
    const int n = static_cast<int>(grid.nodes.size());
    if (prev_mass.size() != n) throw SpecError("sv_filter_step: mass mismatch");
    const double r2 = 1.0 - p.rho * p.rho;

    // Quadrature transition kernel, row-normalized so each source node moves
    // exactly unit mass. Without this the geometric grid is several
    // transition standard deviations coarse at large variance and the raw
    // trapezoid sum can exceed 1 there, inflating tail mass every step.
    std::vector<std::vector<double>> logk(n, std::vector<double>(n));
    for (int j = 0; j < n; ++j) {
        const double v = grid.nodes(j);
        double m = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            logk[j][i] = log_cir_density(p, v, grid.nodes(i), dt) +
                         std::log(grid.weights(i));
            m = std::max(m, logk[j][i]);
        }
        if (!std::isfinite(m))
            throw NumericalError("sv_filter_step: transition underflow");
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += std::exp(logk[j][i] - m);
        double lz = m + std::log(s);
        for (int i = 0; i < n; ++i) logk[j][i] -= lz;
    }

    std::vector<double> logs(n, -std::numeric_limits<double>::infinity());
    for (int i = 0; i < n; ++i) {
        const double x = grid.nodes(i);
        double m = -std::numeric_limits<double>::infinity();
        std::vector<double> terms;
        terms.reserve(n);
        for (int j = 0; j < n; ++j) {
            if (prev_mass(j) <= 0) continue;
            const double v = grid.nodes(j);
            double dB = (x - v - p.kappa * (p.xbar - v) * dt) /
                        (p.gamma * std::sqrt(v));
            double mean = (p.mu - 0.5 * v) * dt + std::sqrt(v) * p.rho * dB;
            double var = v * r2 * dt;
            double lpsi = -0.5 * std::log(var) -
                          (dY - mean) * (dY - mean) / (2.0 * var);
            double t = lpsi + logk[j][i] + std::log(prev_mass(j));
            terms.push_back(t);
            m = std::max(m, t);
        }
        if (terms.empty() || !std::isfinite(m)) continue;
        double s = 0.0;
        for (double t : terms) s += std::exp(t - m);
        logs[i] = m + std::log(s);
    }
    double M = -std::numeric_limits<double>::infinity();
    for (double l : logs) M = std::max(M, l);
    if (!std::isfinite(M))
        throw NumericalError("sv_filter_step: posterior mass underflow");
    VectorXd out(n);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
        out(i) = std::isfinite(logs[i]) ? std::exp(logs[i] - M) : 0.0;
        z += out(i);
    }
    return out / z;
}

double realized_variance(const std::vector<double>& y, double T) {
    if (y.size() < 2) throw SpecError("realized_variance: need >= 2 samples");
    if (T <= 0) throw SpecError("realized_variance: T must be > 0");
    double s = 0.0;
    for (std::size_t k = 1; k < y.size(); ++k) {
        double d = y[k] - y[k - 1];
        s += d * d;
    }
    return s / T;
}

std::pair<double, double> expected_rv_and_premium(const HestonParams& p,
                                                  double E0X0, double T,
                                                  double V0) {
    p.validate();
    if (T <= 0) throw SpecError("expected_rv_and_premium: T must be > 0");
    double kt = p.kappa * T;
    double erv = p.xbar - (p.xbar - E0X0) * (1.0 - std::exp(-kt)) / kt;
    return {erv, V0 - erv};
}

double vix_replication(const OptionCurve& puts, const OptionCurve& calls,
                       double F, double r, double T) {
    if (T <= 0 || F <= 0) throw SpecError("vix_replication: need F, T > 0");
    auto integrate = [](const OptionCurve& c, double lo, double hi) {
        double s = 0.0;
        int used = 0;
        for (std::size_t i = 1; i < c.strikes.size(); ++i) {
            double k0 = c.strikes[i - 1], k1 = c.strikes[i];
            if (k1 <= k0) throw SpecError("vix_replication: strikes must increase");
            if (k0 < lo || k1 > hi) continue;
            double f0 = c.prices[i - 1] / (k0 * k0);
            double f1 = c.prices[i] / (k1 * k1);
            s += 0.5 * (f0 + f1) * (k1 - k0);
            ++used;
        }
        if (used == 0 && !c.strikes.empty())
            throw SpecError("vix_replication: no strikes on one side of F");
        return s;
    };
    if (puts.strikes.empty() || calls.strikes.empty())
        throw SpecError("vix_replication: need strikes on both sides of F");
    double ip = integrate(puts, 0.0, F);
    double ic = integrate(calls, F, std::numeric_limits<double>::infinity());
    return 2.0 * std::exp(r * T) / T * (ip + ic);
}

RegimeFilterResult regime_filter(const MarkovSpec& regimes,
                                 const std::vector<double>& weekly_z,
                                 double eps_std, double week_dt,
                                 double forecast_T) {
    regimes.validate();
    if (eps_std <= 0) throw SpecError("regime_filter: eps_std must be > 0");
    if (week_dt <= 0 || forecast_T <= 0)
        throw SpecError("regime_filter: time spans must be > 0");
    const int d = regimes.d();
    const bool gen = (regimes.kind == ChainKind::Generator);
    const MatrixXd P = gen ? semigroup(regimes, week_dt) : regimes.matrix;

    // Emission mean per starting regime: expected time-average of the level
    // over one week, via Simpson quadrature of the semigroup.
    VectorXd emit(d);
    if (gen) {
        const int Nq = 20;
        for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int k = 0; k <= Nq; ++k) {
                double s = week_dt * k / Nq;
                double wgt = (k == 0 || k == Nq) ? 1.0 : (k % 2 ? 4.0 : 2.0);
                MatrixXd Ps = semigroup(regimes, s);
                acc += wgt * Ps.row(i).dot(regimes.states);
            }
            emit(i) = acc / (3.0 * Nq);
        }
    } else {
        emit = regimes.states;
    }

    RegimeFilterResult res;
    VectorXd pi = VectorXd::Constant(d, 1.0 / d);
    const double inv2 = 1.0 / (2.0 * eps_std * eps_std);
    for (double z : weekly_z) {
        VectorXd pred = P.transpose() * pi;
        VectorXd u(d);
        double m = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < d; ++i) {
            double r = z - emit(i);
            u(i) = -r * r * inv2;
            m = std::max(m, u(i));
        }
        for (int i = 0; i < d; ++i) u(i) = std::exp(u(i) - m) * pred(i);
        double s = u.sum();
        if (!(s > 0)) throw NumericalError("regime_filter: degenerate update");
        pi = u / s;
        res.posterior.push_back(pi);

        // RV forecast: time-average of the predicted level over [0, T].
        const int Nq = 40;
        double acc = 0.0;
        for (int k = 0; k <= Nq; ++k) {
            double s2 = forecast_T * k / Nq;
            double wgt = (k == 0 || k == Nq) ? 0.5 : 1.0;
            VectorXd ps = gen ? VectorXd(semigroup(regimes, s2).transpose() * pi)
                              : pi;
            acc += wgt * ps.dot(regimes.states);
        }
        res.rv_forecast.push_back(acc / Nq);
    }
    return res;
}

} // namespace fb
