#pragma once
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "filterbench/hmm.hpp"

namespace fb {

// Generic state model for sequential Monte Carlo: prior-kernel sampling plus
// pointwise log-likelihood evaluation.
struct StateModel {
    std::function<double(std::mt19937_64&)> sample_initial;
    std::function<double(double, std::mt19937_64&)> sample_transition;
    std::function<double(double, double)> log_likelihood; // (y, x)
};

// Adapter: particle values hold state indices; likelihood through h/gamma.
StateModel hmm_state_model(const DiscreteHMM& hmm);

struct ParticleEnsemble {
    std::vector<double> values;
    std::vector<double> logw;
    int P() const { return static_cast<int>(values.size()); }
    // exp(logw - logsumexp), summing to 1.
    std::vector<double> normalized_weights() const;
};

ParticleEnsemble init_ensemble(const StateModel& model, int P,
                               std::uint64_t seed);

// Propagate by the prior kernel and reweight by the likelihood of y.
// Per-particle RNG streams keyed by (seed, particle, step).
ParticleEnsemble sis_step(const StateModel& model, const ParticleEnsemble& ens,
                          double y, std::uint64_t seed, std::uint64_t step);

double ess(const ParticleEnsemble& ens);

// Multinomial bootstrap resampling; all output weights equal.
ParticleEnsemble sir_resample(const ParticleEnsemble& ens, std::mt19937_64& rng);

struct ParticleFilterResult {
    std::vector<double> estimate; // E[g(X_n) | Y_{0:n}]
    std::vector<double> ess_trace;
    std::vector<char> resampled;
};

ParticleFilterResult particle_filter(const StateModel& model,
                                     const std::vector<double>& obs, int P,
                                     double ess_threshold,
                                     const std::function<double(double)>& g,
                                     std::uint64_t seed);

// Rao-Blackwellized filter for regime-switching scalar linear models:
// X_n = a(theta) X_{n-1} + sigma(theta) B_n, Y_n = h(theta) X_n + gamma(theta) W_n,
// theta a finite chain. Each particle carries a marginal Kalman pair.
struct RegimeModel {
    MarkovSpec regimes; // one-step over regime indices; states hold labels
    VectorXd a, sigma, h, gamma; // per-regime coefficients
    VectorXd p0;                 // initial regime distribution
    double x0_mean = 0.0, x0_var = 1.0;
    void validate() const;
};

struct RBPFResult {
    std::vector<VectorXd> regime_posterior; // per step, over regimes
    std::vector<double> state_estimate;     // E[X_n | Y]
    std::vector<double> ess_trace;
    std::vector<char> resampled;
};

RBPFResult rbpf(const RegimeModel& model, const std::vector<double>& obs, int P,
                double ess_threshold, std::uint64_t seed);

// Plain particle filter on the joint (theta, X) chain of the same model;
// used as the Rao-Blackwell comparison baseline.
RBPFResult joint_pf(const RegimeModel& model, const std::vector<double>& obs,
                    int P, double ess_threshold, std::uint64_t seed);

} // namespace fb
