#pragma once
#include <Eigen/Dense>
#include <set>
#include <string>
#include <vector>

#include "filterbench/errors.hpp"

namespace fb {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct GaussLinearSSM {
    MatrixXd A, H, Qcov, Rcov;
    VectorXd init_mean;
    MatrixXd init_cov;
    void validate() const;
};

struct SignalEstimate {
    VectorXd estimate;
    double snr = 0.0;
    double mse = 0.0;
};

// Empirical figures of merit: SNR = ||X||^2 / ((1/N) sum (X-Xhat)^2).
double empirical_snr(const VectorXd& truth, const VectorXd& est);
double empirical_mse(const VectorXd& truth, const VectorXd& est);

// Matched filter maximizing output SNR for template X in noise covariance R.
// Returns (H = R^{-1} X, snr_max = X' R^{-1} X).
std::pair<VectorXd, double> reed_filter(const MatrixXd& R, const VectorXd& X);

// Keep only DFT coefficients in `keep` (must be closed under k -> (N-k)%N).
VectorXd fft_bandpass(const VectorXd& y, const std::set<int>& keep);

// Orthonormal DWT denoising. `levels` transform depth; detail levels listed
// in `kill` (1 = finest) are zeroed before synthesis.
VectorXd wavelet_denoise(const VectorXd& y, const std::string& family,
                         int levels, const std::set<int>& kill);
bool wavelet_family_available(const std::string& family);

// X_hat = mean + Q (Q+R)^{-1} (y - mean), via linear solves.
VectorXd wiener_filter(const VectorXd& y, const VectorXd& prior_mean,
                       const MatrixXd& Qcov, const MatrixXd& Rcov);

struct KalmanStep {
    VectorXd mean;       // x_hat_n
    MatrixXd cov;        // Sigma_n
    MatrixXd gain;       // G_n
    VectorXd innovation; // V_n
};

std::vector<KalmanStep> kalman_filter(const GaussLinearSSM& model,
                                      const std::vector<VectorXd>& obs);

struct KalmanBucyResult {
    std::vector<double> t;
    std::vector<double> sigma_closed; // Riccati solution, closed form
    std::vector<double> sigma_numeric; // RK4 integration
    std::vector<double> xhat;          // present when dY supplied
    bool divergent = false;            // h = 0 with a > 0
};

// Scalar continuous-time Kalman-Bucy variance flow and (optionally) the
// state estimate driven by observation increments dy on the same grid.
KalmanBucyResult kalman_bucy(double a, double sigma, double h, double gamma,
                             double Sigma0, const std::vector<double>& t_grid,
                             const std::vector<double>* dy = nullptr);

} // namespace fb
