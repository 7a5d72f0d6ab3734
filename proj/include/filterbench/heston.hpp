#pragma once
#include <cstdint>
#include <vector>

#include "filterbench/markov.hpp"

namespace fb {

struct HestonParams {
    double mu = 0.0;    // log-price drift
    double kappa = 1.0; // variance mean-reversion rate
    double xbar = 0.04; // long-run variance
    double gamma = 0.2; // vol of vol
    double rho = 0.0;   // price/variance correlation
    bool feller() const { return gamma * gamma <= 2.0 * kappa * xbar; }
    void validate() const;
};

struct HestonPath {
    std::vector<double> x; // variance
    std::vector<double> y; // log price
    double dt = 0.0;
};

// Positivity-preserving implicit scheme for the variance with the correlated
// log-price discretization; requires dt <= 1/kappa and the Feller condition.
HestonPath simulate_heston(const HestonParams& p, double x0, double y0,
                           double dt, int n, std::uint64_t seed);

// CIR transition density, noncentral chi-square form, log-domain safe.
double cir_density(const HestonParams& p, double v, double x, double dt);
double log_cir_density(const HestonParams& p, double v, double x, double dt);

struct VarianceGrid {
    VectorXd nodes;
    VectorXd weights; // quadrature widths
    VectorXd mass;    // simplex over nodes
};

// Geometric grid over [xbar/50, 50 xbar] (defaults) with trapezoid weights.
VarianceGrid make_variance_grid(const HestonParams& p, int n_nodes = 200,
                                double lo_mult = 0.02, double hi_mult = 50.0);

// One step of the grid volatility filter given a log-price increment.
VectorXd sv_filter_step(const HestonParams& p, const VarianceGrid& grid,
                        const VectorXd& prev_mass, double dY, double dt);

// (1/T) sum of squared increments over the window.
double realized_variance(const std::vector<double>& y, double T);

// Closed-form expected realized variance and the premium against a market
// variance level V0.
std::pair<double, double> expected_rv_and_premium(const HestonParams& p,
                                                  double E0X0, double T,
                                                  double V0);

struct OptionCurve {
    std::vector<double> strikes; // increasing
    std::vector<double> prices;
};

// Static replication of expected realized variance from an option strip.
double vix_replication(const OptionCurve& puts, const OptionCurve& calls,
                       double F, double r, double T);

struct RegimeFilterResult {
    std::vector<VectorXd> posterior;  // per week over regimes
    std::vector<double> rv_forecast;  // next-window prediction
};

// Forward filter over slow regime levels observed through weekly
// realized-variance averages with Gaussian noise.
RegimeFilterResult regime_filter(const MarkovSpec& regimes,
                                 const std::vector<double>& weekly_z,
                                 double eps_std, double week_dt,
                                 double forecast_T);

} // namespace fb
