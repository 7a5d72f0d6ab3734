#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "filterbench/errors.hpp"

namespace fb {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ChainKind { Generator, OneStep };

// Finite-state Markov model: ordered state values plus either a rate matrix
// (rows sum to 0) or a one-step transition matrix (rows sum to 1).
struct MarkovSpec {
    VectorXd states;
    ChainKind kind = ChainKind::OneStep;
    MatrixXd matrix;

    int d() const { return static_cast<int>(states.size()); }
    // Throws SpecError if shapes or row sums are off.
    void validate() const;
};

struct SdePath {
    std::vector<double> times;
    std::vector<double> values;
};

// e^{Q dt} acting as a one-step kernel (rows sum to 1).
MatrixXd semigroup(const MarkovSpec& spec, double dt);

// Matrix exponential by scaling-and-squaring with a Pade approximant.
MatrixXd expm(const MatrixXd& A);

// Stationary distribution: mu * kernel = mu (one-step) or mu * Q = 0.
// Throws SpecError when the invariant is not unique.
VectorXd invariant_distribution(const MarkovSpec& spec);

// (|beta2|, 1 - |beta2|) for a primitive one-step matrix.
std::pair<double, double> spectral_gap(const MarkovSpec& spec);

// Chain path sampled on t_grid; generator chains step through e^{Q dt}.
SdePath simulate_chain(const MarkovSpec& spec, const std::vector<double>& t_grid,
                       std::uint64_t seed);

// Euler scheme for dX = a(X)dt + sigma(X)dB.
SdePath simulate_sde(const std::function<double(double)>& a,
                     const std::function<double(double)>& sigma, double x0,
                     double dt, int n, std::uint64_t seed);

} // namespace fb
