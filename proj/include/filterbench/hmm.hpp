#pragma once
#include <cstdint>
#include <vector>

#include "filterbench/markov.hpp"

namespace fb {

// Discrete-time HMM: latent chain with one-step kernel, observations
// Y_n = h(X_n) + gamma * W_n with standard normal W.
struct DiscreteHMM {
    MarkovSpec chain;   // kind must be OneStep
    VectorXd h;         // per-state observation level
    double gamma = 1.0; // observation noise std
    VectorXd p0;        // initial distribution

    int d() const { return chain.d(); }
    void validate() const;
};

struct FilterTrace {
    std::vector<VectorXd> pi;  // filtering distributions, one per observation
    std::vector<double> logc;  // per-step log normalizers; sum = log-likelihood
    double loglik() const;
};

struct SmoothTrace {
    std::vector<VectorXd> pi_smooth; // pi_{n|N}
    std::vector<VectorXd> alpha;     // backward factors, alpha_N == 1
};

FilterTrace forward_filter(const DiscreteHMM& hmm, const std::vector<double>& obs);

SmoothTrace smooth(const DiscreteHMM& hmm, const std::vector<double>& obs);

// k-step prediction: propagate pi through the kernel k times.
VectorXd predict(const DiscreteHMM& hmm, const VectorXd& pi_n, int k);

// MAP state-index path (log-domain dynamic program, ties to lowest index).
std::vector<int> viterbi(const DiscreteHMM& hmm, const std::vector<double>& obs);

struct EMResult {
    DiscreteHMM hmm;
    std::vector<double> logliks; // one per iteration (likelihood under the
                                 // parameter entering that iteration)
    bool zero_row_warning = false;
};

// EM re-estimation of the transition matrix only; p0 and gamma stay fixed.
EMResult baum_welch_learn(const DiscreteHMM& hmm0, const std::vector<double>& obs,
                          int max_iters, double tol);

// One-parameter random-walk family on an integer window of width W:
// P(i|j) proportional to exp(-theta |i-j|^2), rows normalized over the window.
DiscreteHMM make_theta_hmm(int W, double theta, double gamma);

struct ThetaResult {
    double theta;
    bool at_boundary = false;
};

// Moment-matching update: solve for theta' so the model's expected squared
// jump equals the smoothed average squared jump under theta0.
ThetaResult learn_theta(const std::vector<double>& obs, int W, double theta0,
                        double gamma);

// Simulate a state-index path and observations from the HMM.
void simulate_hmm(const DiscreteHMM& hmm, int n, std::uint64_t seed,
                  std::vector<int>& states, std::vector<double>& obs);

} // namespace fb
