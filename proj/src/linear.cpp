#include "filterbench/linear.hpp"

#include <fftw3.h>

#include <cmath>
#include <iostream>
#include <map>

namespace fb {

void GaussLinearSSM::validate() const {
    const auto dx = A.rows();
    const auto dy = H.rows();
    if (A.cols() != dx || Qcov.rows() != dx || Qcov.cols() != dx ||
        H.cols() != dx || Rcov.rows() != dy || Rcov.cols() != dy ||
        init_mean.size() != dx || init_cov.rows() != dx || init_cov.cols() != dx)
        throw SpecError("GaussLinearSSM: inconsistent dimensions");
    if (!Qcov.isApprox(Qcov.transpose(), 1e-10) ||
        !Rcov.isApprox(Rcov.transpose(), 1e-10))
        throw SpecError("GaussLinearSSM: covariances must be symmetric");
}

double empirical_mse(const VectorXd& truth, const VectorXd& est) {
    return (truth - est).squaredNorm() / truth.size();
}

// Fixed empirical convention: mean-square signal over mean-square error
// (equivalently the ratio of squared norms; the sample count cancels).
double empirical_snr(const VectorXd& truth, const VectorXd& est) {
    return truth.squaredNorm() / (truth - est).squaredNorm();
}

std::pair<VectorXd, double> reed_filter(const MatrixXd& R, const VectorXd& X) {
    if (R.rows() != R.cols() || R.rows() != X.size())
        throw SpecError("reed_filter: dimension mismatch");
    Eigen::LLT<MatrixXd> llt(R);
    if (llt.info() != Eigen::Success)
        throw SpecError("reed_filter: covariance not positive definite");
    VectorXd H = llt.solve(X);
    return {H, X.dot(H)};
}

VectorXd fft_bandpass(const VectorXd& y, const std::set<int>& keep) {
    const int N = static_cast<int>(y.size());
    if (N == 0) throw SpecError("fft_bandpass: empty input");
    for (int k : keep) {
        if (k < 0 || k >= N) throw SpecError("fft_bandpass: index out of range");
        if (!keep.count((N - k) % N))
            throw SpecError("fft_bandpass: keep set not conjugate-symmetric");
    }
    std::vector<double> in(y.data(), y.data() + N);
    std::vector<fftw_complex> spec(N / 2 + 1);
    fftw_plan pf = fftw_plan_dft_r2c_1d(N, in.data(), spec.data(), FFTW_ESTIMATE);
    fftw_execute(pf);
    fftw_destroy_plan(pf);
    for (int k = 0; k <= N / 2; ++k) {
        if (!keep.count(k)) {
            spec[k][0] = 0.0;
            spec[k][1] = 0.0;
        }
    }
    VectorXd out(N);
    fftw_plan pb = fftw_plan_dft_c2r_1d(N, spec.data(), out.data(), FFTW_ESTIMATE);
    fftw_execute(pb);
    fftw_destroy_plan(pb);
    return out / N;
}

namespace {

const std::map<std::string, std::vector<double>>& wavelet_tables() {
    // Orthonormal scaling (lowpass) filters; highpass by quadrature mirror.
    static const std::map<std::string, std::vector<double>> tbl = {
        {"haar", {0.7071067811865476, 0.7071067811865476}},
#ifdef FILTERBENCH_EXTENDED_WAVELETS
        {"db2",
         {0.48296291314469025, 0.836516303737469, 0.22414386804185735,
          -0.12940952255092145}},
        {"db3",
         {0.3326705529509569, 0.8068915093133388, 0.4598775021193313,
          -0.13501102001039084, -0.08544127388224149, 0.035226291882100656}},
        {"db4",
         {0.23037781330885523, 0.7148465705525415, 0.6308807679295904,
          -0.02798376941698385, -0.18703481171888114, 0.030841381835986965,
          0.032883011666982945, -0.010597401784997278}},
        {"sym2",
         {0.48296291314469025, 0.836516303737469, 0.22414386804185735,
          -0.12940952255092145}},
        {"sym3",
         {0.3326705529509569, 0.8068915093133388, 0.4598775021193313,
          -0.13501102001039084, -0.08544127388224149, 0.035226291882100656}},
        {"sym4",
         {-0.07576571478927333, -0.02963552764599851, 0.49761866763201545,
          0.8037387518059161, 0.29785779560527736, -0.09921954357684722,
          -0.012603967262037833, 0.0322231006040427}},
        {"coif1",
         {-0.01565572813546454, -0.0727326195128539, 0.38486484686420286,
          0.8525720202122554, 0.33789766245780922, -0.0727326195128539}},
#endif
    };
    return tbl;
}

// One periodized analysis level: s (length n, even) -> approx a, detail d.
void dwt_level(const std::vector<double>& h, const std::vector<double>& s,
               std::vector<double>& a, std::vector<double>& det) {
    const int n = static_cast<int>(s.size());
    const int L = static_cast<int>(h.size());
    const int half = n / 2;
    a.assign(half, 0.0);
    det.assign(half, 0.0);
    for (int m = 0; m < half; ++m) {
        for (int k = 0; k < L; ++k) {
            int idx = (2 * m + k) % n;
            double g = (k % 2 == 0 ? 1.0 : -1.0) * h[L - 1 - k];
            a[m] += h[k] * s[idx];
            det[m] += g * s[idx];
        }
    }
}

// Inverse of one level; exact transpose of the orthogonal analysis matrix.
void idwt_level(const std::vector<double>& h, const std::vector<double>& a,
                const std::vector<double>& det, std::vector<double>& s) {
    const int half = static_cast<int>(a.size());
    const int n = 2 * half;
    const int L = static_cast<int>(h.size());
    s.assign(n, 0.0);
    for (int m = 0; m < half; ++m) {
        for (int k = 0; k < L; ++k) {
            int idx = (2 * m + k) % n;
            double g = (k % 2 == 0 ? 1.0 : -1.0) * h[L - 1 - k];
            s[idx] += h[k] * a[m] + g * det[m];
        }
    }
}

} // namespace

bool wavelet_family_available(const std::string& family) {
    return wavelet_tables().count(family) > 0;
}

VectorXd wavelet_denoise(const VectorXd& y, const std::string& family,
                         int levels, const std::set<int>& kill) {
    auto it = wavelet_tables().find(family);
    if (it == wavelet_tables().end())
        throw SpecError("wavelet_denoise: unknown or unavailable family '" +
                        family + "'");
    const std::vector<double>& h = it->second;
    const int N = static_cast<int>(y.size());
    if (N == 0) throw SpecError("wavelet_denoise: empty input");

    // Pad to the next power of two with the edge value, trim afterwards.
    int n = 1;
    while (n < N) n <<= 1;
    std::vector<double> s(n, y(N - 1));
    for (int i = 0; i < N; ++i) s[i] = y(i);

    int maxlev = 0;
    for (int m = n; m % 2 == 0 && m > 1; m /= 2) ++maxlev;
    if (levels < 1 || levels > maxlev)
        throw SpecError("wavelet_denoise: invalid level count");

    std::vector<std::vector<double>> details(levels);
    std::vector<double> approx = s, a, det;
    for (int lev = 1; lev <= levels; ++lev) {
        dwt_level(h, approx, a, det);
        details[lev - 1] = det; // index 0 = finest
        approx = a;
    }
    for (int lev : kill) {
        if (lev < 1 || lev > levels)
            throw SpecError("wavelet_denoise: kill level out of range");
        std::fill(details[lev - 1].begin(), details[lev - 1].end(), 0.0);
    }
    for (int lev = levels; lev >= 1; --lev) {
        idwt_level(h, approx, details[lev - 1], s);
        approx = s;
    }
    VectorXd out(N);
    for (int i = 0; i < N; ++i) out(i) = approx[i];
    return out;
}

VectorXd wiener_filter(const VectorXd& y, const VectorXd& prior_mean,
                       const MatrixXd& Qcov, const MatrixXd& Rcov) {
    const auto n = y.size();
    if (prior_mean.size() != n || Qcov.rows() != n || Rcov.rows() != n)
        throw SpecError("wiener_filter: dimension mismatch");
    MatrixXd S = Qcov + Rcov;
    Eigen::LDLT<MatrixXd> ldlt(S);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw SpecError("wiener_filter: Q+R not invertible");

    // Cheap condition estimate: ratio of extreme pivots of the LDLT.
    VectorXd dvec = ldlt.vectorD();
    double dmax = dvec.cwiseAbs().maxCoeff();
    double dmin = dvec.cwiseAbs().minCoeff();
    if (dmin <= 0 || dmax / dmin > 1e12)
        std::cerr << "wiener_filter: (Q+R) ill-conditioned, pivot ratio ~ "
                  << (dmin > 0 ? dmax / dmin : INFINITY) << "\n";

    VectorXd z = ldlt.solve(y - prior_mean);
    return prior_mean + Qcov * z;
}

std::vector<KalmanStep> kalman_filter(const GaussLinearSSM& model,
                                      const std::vector<VectorXd>& obs) {
    model.validate();
    std::vector<KalmanStep> out;
    out.reserve(obs.size());
    VectorXd x = model.init_mean;
    MatrixXd S = model.init_cov;
    const MatrixXd& A = model.A;
    const MatrixXd& H = model.H;
    const MatrixXd I = MatrixXd::Identity(A.rows(), A.rows());
    for (const VectorXd& y : obs) {
        MatrixXd Sp = A * S * A.transpose() + model.Qcov;
        MatrixXd innov_cov = H * Sp * H.transpose() + model.Rcov;
        Eigen::FullPivLU<MatrixXd> lu(innov_cov);
        if (!lu.isInvertible())
            throw NumericalError("kalman_filter: singular innovation covariance");
        MatrixXd G = Sp * H.transpose() * lu.inverse();
        VectorXd xp = A * x;
        VectorXd v = y - H * xp;
        x = xp + G * v;
        S = (I - G * H) * Sp;
        S = 0.5 * (S + S.transpose());
        out.push_back({x, S, G, v});
    }
    return out;
}

KalmanBucyResult kalman_bucy(double a, double sigma, double h, double gamma,
                             double Sigma0, const std::vector<double>& t_grid,
                             const std::vector<double>* dy) {
    if (gamma <= 0) throw SpecError("kalman_bucy: gamma must be > 0");
    if (t_grid.size() < 2) throw SpecError("kalman_bucy: need at least two times");
    KalmanBucyResult res;
    res.t = t_grid;
    const int n = static_cast<int>(t_grid.size());
    res.sigma_closed.resize(n);
    res.sigma_numeric.resize(n);

    auto riccati = [&](double S) {
        return 2.0 * a * S - (h * h) / (gamma * gamma) * S * S + sigma * sigma;
    };

    if (h == 0.0) {
        res.divergent = (a > 0.0);
        // Linear ODE: exact solution replaces the Riccati closed form.
        for (int k = 0; k < n; ++k) {
            double t = t_grid[k] - t_grid[0];
            if (a != 0.0)
                res.sigma_closed[k] = std::exp(2 * a * t) *
                                          (Sigma0 + sigma * sigma / (2 * a)) -
                                      sigma * sigma / (2 * a);
            else
                res.sigma_closed[k] = Sigma0 + sigma * sigma * t;
        }
    } else {
        const double disc = gamma * std::sqrt(a * a * gamma * gamma +
                                              h * h * sigma * sigma);
        const double a1 = (a * gamma * gamma - disc) / (h * h);
        const double a2 = (a * gamma * gamma + disc) / (h * h);
        const double beta = (h * h) / (gamma * gamma) * (a2 - a1);
        if (std::abs(Sigma0 - a2) < 1e-300) {
            for (int k = 0; k < n; ++k) res.sigma_closed[k] = a2;
        } else {
            const double K = (Sigma0 - a1) / (Sigma0 - a2);
            for (int k = 0; k < n; ++k) {
                double t = t_grid[k] - t_grid[0];
                double em = std::exp(-beta * t);
                res.sigma_closed[k] = (a1 * em - K * a2) / (em - K);
            }
        }
    }

    // RK4 on the Riccati flow over the given grid.
    double S = Sigma0;
    res.sigma_numeric[0] = S;
    for (int k = 1; k < n; ++k) {
        double dt = t_grid[k] - t_grid[k - 1];
        if (dt <= 0) throw SpecError("kalman_bucy: times must increase");
        double k1 = riccati(S);
        double k2 = riccati(S + 0.5 * dt * k1);
        double k3 = riccati(S + 0.5 * dt * k2);
        double k4 = riccati(S + dt * k3);
        S += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        res.sigma_numeric[k] = S;
    }

    if (dy) {
        if (static_cast<int>(dy->size()) != n - 1)
            throw SpecError("kalman_bucy: dy must have one entry per interval");
        res.xhat.resize(n);
        double x = 0.0;
        res.xhat[0] = x;
        for (int k = 1; k < n; ++k) {
            double dt = t_grid[k] - t_grid[k - 1];
            double gain = h * res.sigma_numeric[k - 1] / (gamma * gamma);
            x += a * x * dt + gain * ((*dy)[k - 1] - h * x * dt);
            res.xhat[k] = x;
        }
    }
    return res;
}

} // namespace fb
