#pragma once
#include <cstdint>
#include <functional>
#include <vector>

#include "filterbench/markov.hpp"

namespace fb {

// Unnormalized filter mass with a separate log scale so long runs never
// underflow: true mass = mass * exp(logscale).
struct UnnormalizedMass {
    VectorXd mass;
    double logscale = 0.0;
    int clip_count = 0;
};

struct ObsIncrementSeries {
    double dt = 0.0;
    std::vector<double> dy;
};

// Synthesize dy = h(X_t) dt + gamma sqrt(dt) xi on the simulation grid from a
// latent chain path (values are state values mapped through h by index).
ObsIncrementSeries synthesize_obs(const std::vector<int>& state_path,
                                  const VectorXd& h, double gamma, double dt,
                                  std::uint64_t seed);

// One Euler step of the finite-state unnormalized filter:
// p' = p + Q^T p dt + (h/gamma^2) .* p dy, negatives clipped and counted,
// mass rescaled into logscale.
UnnormalizedMass zakai_step(const MarkovSpec& Q, const VectorXd& h, double gamma,
                            const UnnormalizedMass& p, double dy, double dt);

// One Euler step of the normalized filter with innovation dy - hbar dt,
// renormalized exactly.
VectorXd ks_step(const MarkovSpec& Q, const VectorXd& h, double gamma,
                 const VectorXd& pi, double dy, double dt);

struct SmoothResult {
    std::vector<VectorXd> alpha;     // backward factors per grid point <= t
    std::vector<VectorXd> smoothed;  // normalized smoothing masses
};

// Backward factor recursion with terminal alpha = 1 at index t_index;
// smoothing mass proportional to filter .* alpha.
SmoothResult smooth_alpha(const MarkovSpec& Q, const VectorXd& h, double gamma,
                          const ObsIncrementSeries& obs, int t_index,
                          const VectorXd& p0);

// Monte Carlo filter from the holding-time chain approximation: copies of the
// approximate process weighted by the observation likelihood ratio.
std::vector<double> mc_approx_filter(const MarkovSpec& chain, int n,
                                     const ObsIncrementSeries& obs,
                                     const std::function<double(double)>& g,
                                     std::uint64_t seed, const VectorXd& p0,
                                     const VectorXd& h, double gamma,
                                     int copies = 2000);

struct BirthDeathApprox {
    MarkovSpec spec;   // one-step over the grid
    VectorXd hold_dt;  // state-dependent time step
};

// Birth-death chain on the grid {k/n} within [range_lo, range_hi]:
// p(up/down) = (sigma^2 +- a/n) / (2 sigma^2), hold 1/(n^2 sigma^2).
BirthDeathApprox sde_chain_approx(const std::function<double(double)>& a,
                                  const std::function<double(double)>& sigma,
                                  int n, double range_lo, double range_hi);

// Posterior at t = 1 from a single integrated observation increment y1 - y0,
// marginalizing the latent path by exact path-sum (small problems) or bridge
// Monte Carlo.
VectorXd sparse_obs_filter(const MarkovSpec& chain, int n, double y0, double y1,
                           double gamma, const VectorXd& p0, const VectorXd& h,
                           bool force_mc = false, std::uint64_t seed = 1,
                           int mc_paths = 20000);

} // namespace fb
