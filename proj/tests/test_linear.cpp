#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "filterbench/linear.hpp"

using namespace fb;

TEST_CASE("reed filter with identity covariance") {
    VectorXd X(3);
    X << 1, 2, 3;
    auto [H, snr] = reed_filter(MatrixXd::Identity(3, 3), X);
    CHECK((H - X).norm() < 1e-12);
    CHECK(snr == doctest::Approx(14.0));
    auto [H4, snr4] = reed_filter(4.0 * MatrixXd::Identity(3, 3), X);
    CHECK(snr4 == doctest::Approx(3.5));
}

TEST_CASE("reed filter is optimal among random candidates") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = 6;
    MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = normal(rng);
    MatrixXd R = B * B.transpose() + MatrixXd::Identity(n, n);
    VectorXd X(n);
    for (int i = 0; i < n; ++i) X(i) = normal(rng);
    auto [H, snr] = reed_filter(R, X);
    auto out_snr = [&](const VectorXd& G) {
        double s = G.dot(X);
        return s * s / G.dot(R * G);
    };
    CHECK(out_snr(H) == doctest::Approx(snr).epsilon(1e-9));
    for (int t = 0; t < 1000; ++t) {
        VectorXd G(n);
        for (int i = 0; i < n; ++i) G(i) = normal(rng);
        CHECK(out_snr(G) <= snr + 1e-9);
    }
}

TEST_CASE("reed filter rejects singular covariance") {
    MatrixXd R = MatrixXd::Zero(2, 2);
    VectorXd X = VectorXd::Ones(2);
    CHECK_THROWS_AS(reed_filter(R, X), SpecError);
}

TEST_CASE("bandpass with all frequencies is the identity") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = 64;
    VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = normal(rng);
    std::set<int> keep;
    for (int k = 0; k < n; ++k) keep.insert(k);
    CHECK((fft_bandpass(y, keep) - y).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("bandpass recovers a pure tone") {
    const int n = 128;
    VectorXd sig(n), y(n);
    for (int i = 0; i < n; ++i) {
        sig(i) = std::sin(2 * M_PI * 5 * i / n);
        y(i) = sig(i) + 0.8 * std::cos(2 * M_PI * 40 * i / n);
    }
    std::set<int> keep = {5, n - 5};
    CHECK((fft_bandpass(y, keep) - sig).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("bandpass rejects asymmetric keep sets") {
    VectorXd y = VectorXd::Ones(16);
    CHECK_THROWS_AS(fft_bandpass(y, std::set<int>{3}), SpecError);
}

TEST_CASE("wavelet reconstruction with empty kill set") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::string> fams = {"haar"};
    if (wavelet_family_available("db2"))
        fams.insert(fams.end(), {"db2", "db3", "db4", "sym4", "coif1"});
    for (const auto& fam : fams) {
        VectorXd y(256);
        for (int i = 0; i < 256; ++i) y(i) = normal(rng);
        VectorXd out = wavelet_denoise(y, fam, 4, {});
        CHECK((out - y).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("wavelet transform preserves energy") {
    // Parseval through the round trip with a killed level: the removed
    // energy equals the energy drop of the reconstruction.
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd y(128);
    for (int i = 0; i < 128; ++i) y(i) = normal(rng);
    VectorXd den = wavelet_denoise(y, "haar", 3, {1});
    VectorXd resid = y - den;
    CHECK(std::abs(y.squaredNorm() - den.squaredNorm() - resid.squaredNorm()) <
          1e-9);
}

TEST_CASE("haar recovers piecewise constant blocks") {
    VectorXd y(64);
    for (int i = 0; i < 64; ++i) y(i) = (i < 32) ? 1.0 : -2.0;
    // Blocks of length 32 live entirely in coarse scales; killing the three
    // finest detail levels must not change them.
    VectorXd out = wavelet_denoise(y, "haar", 5, {1, 2, 3});
    CHECK((out - y).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("wavelet rejects unknown family") {
    VectorXd y = VectorXd::Ones(32);
    CHECK_THROWS_AS(wavelet_denoise(y, "meyer", 2, {}), SpecError);
}

TEST_CASE("wiener limits") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = 20;
    VectorXd y(n), mean(n);
    for (int i = 0; i < n; ++i) {
        y(i) = normal(rng);
        mean(i) = 0.3 * normal(rng);
    }
    MatrixXd Q = MatrixXd::Identity(n, n);
    // R -> 0: estimate = data.
    VectorXd a = wiener_filter(y, mean, Q, 1e-14 * MatrixXd::Identity(n, n));
    CHECK((a - y).cwiseAbs().maxCoeff() < 1e-6);
    // Q -> 0: estimate = prior mean.
    VectorXd b = wiener_filter(y, mean, 1e-14 * Q, MatrixXd::Identity(n, n));
    CHECK((b - mean).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("kalman gain recursion for the scalar random walk") {
    GaussLinearSSM m;
    m.A = m.H = m.Qcov = MatrixXd::Identity(1, 1);
    double g2 = 0.5;
    m.Rcov = g2 * MatrixXd::Identity(1, 1);
    m.init_mean = VectorXd::Zero(1);
    m.init_cov = MatrixXd::Identity(1, 1);
    std::vector<VectorXd> obs(10, VectorXd::Zero(1));
    auto steps = kalman_filter(m, obs);
    double S = 1.0;
    for (const auto& st : steps) {
        double expect = (S + 1.0) / (S + 1.0 + g2);
        CHECK(st.gain(0, 0) == doctest::Approx(expect).epsilon(1e-12));
        S = st.cov(0, 0);
    }
}

TEST_CASE("kalman with perfect observations tracks the data") {
    GaussLinearSSM m;
    m.A = m.H = m.Qcov = MatrixXd::Identity(2, 2);
    m.Rcov = 1e-12 * MatrixXd::Identity(2, 2);
    m.init_mean = VectorXd::Zero(2);
    m.init_cov = MatrixXd::Identity(2, 2);
    std::vector<VectorXd> obs;
    std::mt19937_64 rng(13);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 5; ++i) {
        VectorXd y(2);
        y << normal(rng), normal(rng);
        obs.push_back(y);
    }
    auto steps = kalman_filter(m, obs);
    for (std::size_t i = 0; i < obs.size(); ++i)
        CHECK((steps[i].mean - obs[i]).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("kalman covariances stay symmetric PSD") {
    GaussLinearSSM m;
    m.A = MatrixXd(2, 2);
    m.A << 0.9, 0.2, -0.1, 0.8;
    m.H = MatrixXd::Identity(2, 2);
    m.Qcov = 0.3 * MatrixXd::Identity(2, 2);
    m.Rcov = 0.5 * MatrixXd::Identity(2, 2);
    m.init_mean = VectorXd::Zero(2);
    m.init_cov = MatrixXd::Identity(2, 2);
    std::mt19937_64 rng(15);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<VectorXd> obs;
    for (int i = 0; i < 50; ++i) {
        VectorXd y(2);
        y << normal(rng), normal(rng);
        obs.push_back(y);
    }
    for (const auto& st : kalman_filter(m, obs)) {
        CHECK((st.cov - st.cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(st.cov);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
}

TEST_CASE("kalman innovations are empirically white") {
    GaussLinearSSM m;
    m.A = m.H = MatrixXd::Identity(1, 1);
    m.Qcov = 0.25 * MatrixXd::Identity(1, 1);
    m.Rcov = MatrixXd::Identity(1, 1);
    m.init_mean = VectorXd::Zero(1);
    m.init_cov = MatrixXd::Identity(1, 1);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int N = 4000;
    std::vector<VectorXd> obs;
    double x = 0.0;
    for (int i = 0; i < N; ++i) {
        x += 0.5 * normal(rng);
        obs.push_back(VectorXd::Constant(1, x + normal(rng)));
    }
    auto steps = kalman_filter(m, obs);
    double s0 = 0, s1 = 0;
    for (int i = 1; i < N; ++i) {
        s0 += steps[i].innovation(0) * steps[i].innovation(0);
        s1 += steps[i].innovation(0) * steps[i - 1].innovation(0);
    }
    CHECK(std::abs(s1 / s0) < 4.0 / std::sqrt(double(N)));
}

TEST_CASE("kalman terminal estimate equals the wiener estimate") {
    // Scalar random-walk model observed in white noise; the batch Wiener
    // solution and the recursive filter agree at the last index.
    const int n = 60;
    const double q = 0.3, r = 0.7;
    std::mt19937_64 rng(19);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd y(n);
    double x = 0.0;
    for (int i = 0; i < n; ++i) {
        x += std::sqrt(q) * normal(rng);
        y(i) = x + std::sqrt(r) * normal(rng);
    }
    MatrixXd Q(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) Q(i, j) = q * (std::min(i, j) + 1);
    VectorXd w = wiener_filter(y, VectorXd::Zero(n), Q,
                               r * MatrixXd::Identity(n, n));
    GaussLinearSSM m;
    m.A = m.H = MatrixXd::Identity(1, 1);
    m.Qcov = q * MatrixXd::Identity(1, 1);
    m.Rcov = r * MatrixXd::Identity(1, 1);
    m.init_mean = VectorXd::Zero(1);
    m.init_cov = MatrixXd::Zero(1, 1);
    std::vector<VectorXd> obs(n);
    for (int i = 0; i < n; ++i) obs[i] = VectorXd::Constant(1, y(i));
    auto steps = kalman_filter(m, obs);
    CHECK(steps.back().mean(0) == doctest::Approx(w(n - 1)).epsilon(1e-8));
}

TEST_CASE("kalman-bucy closed form vs RK4 and equilibrium") {
    std::vector<double> grid;
    for (double t = 0.0; t <= 20.0 + 1e-9; t += 0.01) grid.push_back(t);
    double a = -0.5, sigma = 1.0, h = 1.0, gamma = 0.7;
    auto res = kalman_bucy(a, sigma, h, gamma, 2.0, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(std::abs(res.sigma_closed[i] - res.sigma_numeric[i]) < 1e-6);

    // a=0, sigma=h=gamma=1: stationary variance is 1.
    auto r2 = kalman_bucy(0.0, 1.0, 1.0, 1.0, 0.3, grid);
    CHECK(r2.sigma_numeric.back() == doctest::Approx(1.0).epsilon(1e-8));
    auto r3 = kalman_bucy(0.0, 1.0, 1.0, 1.0, 1.0, grid);
    for (double s : r3.sigma_closed) CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("kalman-bucy forgets its initialization") {
    double a = 0.3, sigma = 1.0, h = 1.2, gamma = 0.8;
    double beta = std::sqrt(a * a * gamma * gamma + h * h * sigma * sigma) / gamma;
    double tmax = 20.0 / beta;
    std::vector<double> grid;
    for (double t = 0.0; t <= tmax + 1e-9; t += tmax / 4000) grid.push_back(t);
    auto r1 = kalman_bucy(a, sigma, h, gamma, 0.1, grid);
    auto r2 = kalman_bucy(a, sigma, h, gamma, 5.0, grid);
    CHECK(std::abs(r1.sigma_closed.back() - r2.sigma_closed.back()) < 1e-6);
    CHECK(std::abs(r1.sigma_numeric.back() - r2.sigma_numeric.back()) < 1e-6);
}

TEST_CASE("kalman-bucy flags divergence when unobservable") {
    std::vector<double> grid = {0.0, 0.5, 1.0};
    auto res = kalman_bucy(0.5, 1.0, 0.0, 1.0, 1.0, grid);
    CHECK(res.divergent);
    CHECK(res.sigma_numeric.back() > res.sigma_numeric.front());
}
