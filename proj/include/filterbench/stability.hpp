#pragma once
#include <cstdint>
#include <vector>

#include "filterbench/hmm.hpp"

namespace fb {

// Likelihood-weighted transition cocycle T_n = diag(psi_n) Lambda^T acting on
// unnormalized filter masses.
struct FilterCocycle {
    MatrixXd lambda_T;
    std::vector<VectorXd> psi; // per-step positive likelihood diagonals
};

// Cocycle built from an HMM and an observation stream.
FilterCocycle make_cocycle(const DiscreteHMM& hmm, const std::vector<double>& obs);

// p_n = T_n ... T_1 nu, renormalized each step; returns the unit direction
// and accumulated log norm.
std::pair<VectorXd, double> propagate_unnormalized(const FilterCocycle& c,
                                                   const VectorXd& nu, int n);

struct LyapunovEstimate {
    double v1 = 0.0, v2 = 0.0;
    double v1_se = 0.0, v2_se = 0.0;
};

// Top two Lyapunov exponents of the cocycle via wedge-norm growth with
// periodic re-orthonormalization; averaged over seeds (fresh observation
// streams simulated from the HMM).
LyapunovEstimate lyapunov_spectrum(const DiscreteHMM& hmm, int n,
                                   const std::vector<std::uint64_t>& seeds);

struct ExponentEstimate {
    double exponent = 0.0;
    double se = 0.0;
    bool hit_zero = false; // distance reached exact 0
};

// Decay rate of || pi^nu - pi^nu_tilde || along a shared observation stream,
// tail-averaged over the last half, batch-means standard error across seeds.
ExponentEstimate empirical_exponent(const DiscreteHMM& hmm, const VectorXd& nu,
                                    const VectorXd& nu_tilde, int n,
                                    const std::vector<std::uint64_t>& seeds);

struct ExponentBounds {
    double coupling = 0.0;        // -2 min sqrt(L_ij L_ji)
    double low_noise_upper = 0.0; // in units of gamma^2 * exponent
    double low_noise_lower = 0.0;
};

ExponentBounds exponent_bounds(const MatrixXd& lambda, const VectorXd& h,
                               const VectorXd& mu);

// Fixed 4-state cyclic chain observed noiselessly through an indicator;
// two filters with different priors on the ambiguous pair never merge.
std::vector<double> counterexample_run(int n, std::uint64_t seed,
                                       double nu_w = 0.5, double nu_tw = 0.9);

// Running average of g(X_k, pi_k) along a simulated HMM path.
std::vector<double> ergodic_average(
    const DiscreteHMM& hmm,
    const std::function<double(double, const VectorXd&)>& g, int n,
    std::uint64_t seed);

} // namespace fb
