#include "filterbench/hmm.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>

#include "filterbench/rng.hpp"

namespace fb {

void DiscreteHMM::validate() const {
    chain.validate();
    if (chain.kind != ChainKind::OneStep)
        throw SpecError("DiscreteHMM: chain must be a one-step spec");
    if (h.size() != chain.d()) throw SpecError("DiscreteHMM: h length mismatch");
    if (gamma <= 0) throw SpecError("DiscreteHMM: gamma must be > 0");
    if (p0.size() != chain.d() || std::abs(p0.sum() - 1.0) > 1e-10 ||
        p0.minCoeff() < -1e-14)
        throw SpecError("DiscreteHMM: p0 is not a distribution");
}

double FilterTrace::loglik() const {
    return std::accumulate(logc.begin(), logc.end(), 0.0);
}

namespace {

// Gaussian log-likelihood column for one observation, up to the constant
// -log(gamma sqrt(2 pi)) which cancels in every normalized quantity but is
// kept so that sum(logc) is the true log-likelihood.
VectorXd log_psi(const DiscreteHMM& hmm, double y) {
    const double inv2 = 1.0 / (2.0 * hmm.gamma * hmm.gamma);
    const double lc = -std::log(hmm.gamma) - 0.5 * std::log(2.0 * M_PI);
    VectorXd lp(hmm.d());
    for (int i = 0; i < hmm.d(); ++i) {
        double r = y - hmm.h(i);
        lp(i) = lc - r * r * inv2;
    }
    return lp;
}

// Internals shared by filter/smoother/EM: forward pass storing the scaled
// likelihood columns psi~ = exp(logpsi - m) and scaled normalizers c~ with
// logc = log(c~) + m.  All downstream recursions use the scaled pair, which
// is algebraically identical to the unscaled one.
struct ForwardPass {
    std::vector<VectorXd> pi;
    std::vector<VectorXd> psi_scaled;
    std::vector<double> c_scaled;
    std::vector<double> logc;
};

ForwardPass run_forward(const DiscreteHMM& hmm, const std::vector<double>& obs) {
    hmm.validate();
    if (obs.empty()) throw SpecError("forward_filter: empty observation sequence");
    const int N = static_cast<int>(obs.size());
    const MatrixXd LT = hmm.chain.matrix.transpose();
    ForwardPass fp;
    fp.pi.resize(N);
    fp.psi_scaled.resize(N);
    fp.c_scaled.resize(N);
    fp.logc.resize(N);
    VectorXd prev = hmm.p0;
    for (int n = 0; n < N; ++n) {
        VectorXd lp = log_psi(hmm, obs[n]);
        double m = lp.maxCoeff();
        VectorXd psi = (lp.array() - m).exp();
        VectorXd pred = (n == 0) ? prev : VectorXd(LT * prev);
        VectorXd u = psi.cwiseProduct(pred);
        double c = u.sum();
        if (!(c > 0.0))
            throw NumericalError("forward_filter: degenerate likelihood at step " +
                                 std::to_string(n));
        fp.pi[n] = u / c;
        fp.psi_scaled[n] = psi;
        fp.c_scaled[n] = c;
        fp.logc[n] = std::log(c) + m;
        prev = fp.pi[n];
    }
    return fp;
}

} // namespace

FilterTrace forward_filter(const DiscreteHMM& hmm, const std::vector<double>& obs) {
    ForwardPass fp = run_forward(hmm, obs);
    return FilterTrace{std::move(fp.pi), std::move(fp.logc)};
}

SmoothTrace smooth(const DiscreteHMM& hmm, const std::vector<double>& obs) {
    ForwardPass fp = run_forward(hmm, obs);
    const int N = static_cast<int>(obs.size());
    const MatrixXd& L = hmm.chain.matrix;
    SmoothTrace st;
    st.alpha.resize(N);
    st.pi_smooth.resize(N);
    st.alpha[N - 1] = VectorXd::Ones(hmm.d());
    for (int n = N - 2; n >= 0; --n)
        st.alpha[n] = L * st.alpha[n + 1].cwiseProduct(fp.psi_scaled[n + 1]) /
                      fp.c_scaled[n + 1];
    for (int n = 0; n < N; ++n) {
        VectorXd s = st.alpha[n].cwiseProduct(fp.pi[n]);
        st.pi_smooth[n] = s / s.sum();
    }
    return st;
}

VectorXd predict(const DiscreteHMM& hmm, const VectorXd& pi_n, int k) {
    hmm.validate();
    if (k < 0) throw SpecError("predict: k must be >= 0");
    VectorXd p = pi_n;
    const MatrixXd LT = hmm.chain.matrix.transpose();
    for (int i = 0; i < k; ++i) p = LT * p;
    return p;
}

std::vector<int> viterbi(const DiscreteHMM& hmm, const std::vector<double>& obs) {
    hmm.validate();
    if (obs.empty()) throw SpecError("viterbi: empty observation sequence");
    const int N = static_cast<int>(obs.size());
    const int d = hmm.d();
    constexpr double NEG = -std::numeric_limits<double>::infinity();
    MatrixXd logL(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            logL(j, i) = hmm.chain.matrix(j, i) > 0
                             ? std::log(hmm.chain.matrix(j, i))
                             : NEG;

    std::vector<VectorXd> phi(N);
    std::vector<std::vector<int>> back(N, std::vector<int>(d, 0));
    VectorXd lp0 = log_psi(hmm, obs[0]);
    phi[0] = VectorXd(d);
    for (int i = 0; i < d; ++i)
        phi[0](i) = lp0(i) + (hmm.p0(i) > 0 ? std::log(hmm.p0(i)) : NEG);
    for (int n = 1; n < N; ++n) {
        VectorXd lp = log_psi(hmm, obs[n]);
        phi[n] = VectorXd(d);
        for (int v = 0; v < d; ++v) {
            double best = NEG;
            int arg = 0;
            for (int x = 0; x < d; ++x) {
                double s = logL(x, v) + phi[n - 1](x);
                // Strict inequality with ascending x keeps ties at the
                // lowest state index.
                if (s > best) {
                    best = s;
                    arg = x;
                }
            }
            phi[n](v) = lp(v) + best;
            back[n][v] = arg;
        }
    }
    std::vector<int> path(N);
    int arg = 0;
    double best = NEG;
    for (int v = 0; v < d; ++v)
        if (phi[N - 1](v) > best) {
            best = phi[N - 1](v);
            arg = v;
        }
    path[N - 1] = arg;
    for (int n = N - 1; n > 0; --n) path[n - 1] = back[n][path[n]];
    return path;
}

EMResult baum_welch_learn(const DiscreteHMM& hmm0, const std::vector<double>& obs,
                          int max_iters, double tol) {
    hmm0.validate();
    if (max_iters < 1) throw SpecError("baum_welch_learn: max_iters must be >= 1");
    const int N = static_cast<int>(obs.size());
    const int d = hmm0.d();
    EMResult res;
    res.hmm = hmm0;
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        ForwardPass fp = run_forward(res.hmm, obs);
        double ll = std::accumulate(fp.logc.begin(), fp.logc.end(), 0.0);
        res.logliks.push_back(ll);

        // Backward factors for the current parameter.
        const MatrixXd& L = res.hmm.chain.matrix;
        std::vector<VectorXd> alpha(N);
        alpha[N - 1] = VectorXd::Ones(d);
        for (int n = N - 2; n >= 0; --n)
            alpha[n] = L * alpha[n + 1].cwiseProduct(fp.psi_scaled[n + 1]) /
                       fp.c_scaled[n + 1];

        // Expected transition counts C(j,i) = sum_n P(X_{n-1}=j, X_n=i | Y).
        MatrixXd C = MatrixXd::Zero(d, d);
        for (int n = 1; n < N; ++n) {
            for (int j = 0; j < d; ++j)
                for (int i = 0; i < d; ++i)
                    C(j, i) += alpha[n](i) * fp.psi_scaled[n](i) * L(j, i) *
                               fp.pi[n - 1](j) / fp.c_scaled[n];
        }
        MatrixXd Lnew = L;
        for (int j = 0; j < d; ++j) {
            double row = C.row(j).sum();
            if (row <= 0) {
                res.zero_row_warning = true;
                std::cerr << "baum_welch_learn: zero expected-count row " << j
                          << ", keeping previous values\n";
            } else {
                Lnew.row(j) = C.row(j) / row;
            }
        }
        res.hmm.chain.matrix = Lnew;
        if (it > 0 && ll - prev_ll < tol) break;
        prev_ll = ll;
    }
    return res;
}

DiscreteHMM make_theta_hmm(int W, double theta, double gamma) {
    if (W < 2) throw SpecError("make_theta_hmm: window too small");
    if (theta <= 0) throw SpecError("make_theta_hmm: theta must be > 0");
    DiscreteHMM hmm;
    hmm.chain.kind = ChainKind::OneStep;
    hmm.chain.states = VectorXd(W);
    const int off = W / 2;
    for (int i = 0; i < W; ++i) hmm.chain.states(i) = i - off;
    hmm.chain.matrix = MatrixXd(W, W);
    for (int j = 0; j < W; ++j) {
        double z = 0.0;
        for (int i = 0; i < W; ++i) {
            double v = std::exp(-theta * (i - j) * (i - j));
            hmm.chain.matrix(j, i) = v;
            z += v;
        }
        hmm.chain.matrix.row(j) /= z;
    }
    hmm.h = hmm.chain.states;
    hmm.gamma = gamma;
    hmm.p0 = VectorXd::Constant(W, 1.0 / W);
    return hmm;
}

namespace {

// Model expected squared jump from the window center under theta.
double model_sq_jump(int W, double theta) {
    const int j = W / 2;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < W; ++i) {
        double d2 = static_cast<double>(i - j) * (i - j);
        double w = std::exp(-theta * d2);
        num += d2 * w;
        den += w;
    }
    return num / den;
}

} // namespace

ThetaResult learn_theta(const std::vector<double>& obs, int W, double theta0,
                        double gamma) {
    if (theta0 <= 0) throw SpecError("learn_theta: theta0 must be > 0");
    DiscreteHMM hmm = make_theta_hmm(W, theta0, gamma);
    const int N = static_cast<int>(obs.size());
    if (N < 2) throw SpecError("learn_theta: need at least two observations");

    // Smoothed average squared jump under theta0.
    ForwardPass fp = run_forward(hmm, obs);
    const MatrixXd& L = hmm.chain.matrix;
    const int d = W;
    std::vector<VectorXd> alpha(N);
    alpha[N - 1] = VectorXd::Ones(d);
    for (int n = N - 2; n >= 0; --n)
        alpha[n] = L * alpha[n + 1].cwiseProduct(fp.psi_scaled[n + 1]) /
                   fp.c_scaled[n + 1];
    double target = 0.0;
    for (int n = 1; n < N; ++n) {
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) {
                double p = alpha[n](i) * fp.psi_scaled[n](i) * L(j, i) *
                           fp.pi[n - 1](j) / fp.c_scaled[n];
                target += p * (i - j) * (i - j);
            }
    }
    target /= (N - 1);

    // model_sq_jump is strictly decreasing in theta; bisect.
    const double lo_th = 1e-4, hi_th = 50.0;
    ThetaResult out;
    if (target >= model_sq_jump(W, lo_th)) {
        std::cerr << "learn_theta: root at lower boundary\n";
        out.theta = lo_th;
        out.at_boundary = true;
        return out;
    }
    if (target <= model_sq_jump(W, hi_th)) {
        std::cerr << "learn_theta: root at upper boundary\n";
        out.theta = hi_th;
        out.at_boundary = true;
        return out;
    }
    double lo = lo_th, hi = hi_th;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (model_sq_jump(W, mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    out.theta = 0.5 * (lo + hi);
    return out;
}

void simulate_hmm(const DiscreteHMM& hmm, int n, std::uint64_t seed,
                  std::vector<int>& states, std::vector<double>& obs) {
    hmm.validate();
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = hmm.d();
    auto draw = [&](const VectorXd& p) {
        double u = unif(rng), acc = 0.0;
        for (int i = 0; i < d; ++i) {
            acc += p(i);
            if (u <= acc) return i;
        }
        return d - 1;
    };
    states.resize(n);
    obs.resize(n);
    int s = draw(hmm.p0);
    for (int k = 0; k < n; ++k) {
        if (k > 0) s = draw(hmm.chain.matrix.row(s).transpose());
        states[k] = s;
        obs[k] = hmm.h(s) + hmm.gamma * normal(rng);
    }
}

} // namespace fb
